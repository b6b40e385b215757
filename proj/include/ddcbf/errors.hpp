#pragma once

#include <stdexcept>
#include <string>

namespace ddcbf {

/// Base of every library error. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, singular systems, diverging training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Power budget exceeded.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace ddcbf
