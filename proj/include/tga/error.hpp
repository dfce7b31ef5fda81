#pragma once

#include <stdexcept>
#include <string>

namespace tga {

// Malformed files, broken references, invalid configurations.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Arithmetic gone bad: non-finite values, broken numeric contracts.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed flag values at the CLI layer.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tga
