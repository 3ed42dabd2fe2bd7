#pragma once

#include <stdexcept>
#include <string>

namespace uvface {

// Shape/dimension mismatches between tensors or maps.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (files, meshes, datasets).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or numerically impossible states (NaN loss, non-PSD
// covariance beyond tolerance).
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: wrong call order, invalid enum, contract violations.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace uvface
