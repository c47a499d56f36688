#pragma once

#include <stdexcept>
#include <string>

namespace ger {

// Base of every error the toolkit raises on bad input or environment.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad flag values, missing required paths, k > #examples).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that violates a record contract (duplicate ids, non-finite scores).
class DataError : public Error {
 public:
  using Error::Error;
};

// Byte-level format violation (bad magic, truncated payload, malformed line).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// An LLM backend call failed. Transient failures (timeouts, 429, 5xx) are retried.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool transient)
      : Error(what), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

}  // namespace ger
