#pragma once

#include <stdexcept>
#include <string>

namespace splvm {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input data, model structure or configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, parsed or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (non positive definite matrix, zero variance, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace splvm
