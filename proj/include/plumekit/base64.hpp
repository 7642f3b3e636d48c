#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace plumekit {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // throws on malformed input

}  // namespace plumekit
