#pragma once

#include <stdexcept>
#include <string>

namespace sparsecd {

/// Shapes that do not line up for an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Spatial geometry that an operation cannot tile (kernel/stride/gamma).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN or infinity where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A class label outside the valid range.
class LabelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse, e.g. backward() on a non-scalar.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparsecd
