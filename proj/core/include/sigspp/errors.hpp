#ifndef SIGSPP_ERRORS_HPP_
#define SIGSPP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sigspp {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad configuration / parameters (CLI exit code 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

// Bad input data: files, manifests, images (CLI exit code 3).
class DataError : public Error {
public:
  using Error::Error;
};

// Tensor / weight dimension mismatches.
class ShapeError : public DataError {
public:
  using DataError::DataError;
};

// Non-finite values, failed numeric checks (CLI exit code 4).
class NumericError : public Error {
public:
  using Error::Error;
};

// API misuse, e.g. backward before forward.
class StateError : public Error {
public:
  using Error::Error;
};

}  // namespace sigspp

#endif  // SIGSPP_ERRORS_HPP_
