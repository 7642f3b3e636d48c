#pragma once

#include <stdexcept>
#include <string>

namespace plumekit {

// All module-level failures surface as this type; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace plumekit
