#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stereoind {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (shot counts, fold counts, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

// Operation not allowed in the current state (annotation workflow).
class StateError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Carries the list of human-readable violation messages.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> details)
      : Error(what), details_(std::move(details)) {}

  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  std::vector<std::string> details_;
};

}  // namespace stereoind
