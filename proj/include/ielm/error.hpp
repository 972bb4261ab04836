#pragma once

#include <stdexcept>
#include <string>

namespace ielm {

// Base of every error thrown by the library. The CLI maps subclasses to
// distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands (matrix dims, feature count n).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Numeric precondition failure: Cholesky breakdown, NaN input, overflow
// headroom, all-zero beta.
class NumericError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  IoError(const std::string& message, std::string path)
      : Error(message + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Malformed file contents (bad magic, truncation, count mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid argument outside the categories above (bad label, empty set,
// fraction out of range, zero input vector).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Unknown or ill-typed experiment configuration key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::string key)
      : Error(message + ": " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace ielm
