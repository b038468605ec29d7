#pragma once

#include <stdexcept>
#include <string>

namespace eblime {

// Base of every error the library throws. `exit_code()` is the CLI mapping.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Cholesky breakdown, non-finite log-determinant, negative quadratic form.
class NumericDegeneracy : public Error {
 public:
  using Error::Error;
};

// An operation was called on an object in the wrong state (e.g. unfilled grid).
class StateError : public Error {
 public:
  using Error::Error;
};

// External black-box adapter misbehaved: crash, malformed line, id mismatch.
class AdapterProtocolError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace eblime
