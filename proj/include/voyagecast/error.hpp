#pragma once

#include <stdexcept>
#include <string>

namespace voyagecast {

// Input or invariant violation detected while validating data or arguments.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Bad configuration key or value.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace voyagecast
