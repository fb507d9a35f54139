#pragma once

#include <stdexcept>
#include <string>

namespace rgib {

// Data/format problems (exit code 2 at the CLI).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite numerics (exit code 3 at the CLI).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rgib
