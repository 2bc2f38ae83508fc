#pragma once

#include <stdexcept>
#include <string>

namespace locret {

/// Malformed input, schema mismatch, or unreadable/unwritable files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint or file whose bytes do not parse.
class CorruptFileError : public DataError {
 public:
  using DataError::DataError;
};

/// A checkpoint written by another format version or for another vocabulary.
class VersionError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf in parameters, gradients or losses.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace locret
