#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace plumekit {

// Whole-file helpers; errors name the path.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

nlohmann::json read_json_file(const std::filesystem::path& path);
// Pretty-printed with a trailing newline so outputs are stable and diffable.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace plumekit
