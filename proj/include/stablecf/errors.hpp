#pragma once
#include <stdexcept>
#include <string>

namespace stablecf {

// Raised for malformed or unusable input (files, shapes, parameter domains).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a numeric routine leaves its validated regime (non-finite
// values, failed convergence, invalid tables).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stablecf
