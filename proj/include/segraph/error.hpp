#pragma once

#include <stdexcept>
#include <string>

namespace segraph {

// Error classes map onto distinct CLI exit codes (see tools/segraph.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad or inconsistent input data: unreadable files, malformed records,
// unknown node ids, missing artifacts.
class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// The embedding provider could not resolve the text for a message.
class UnresolvedContentError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace segraph
