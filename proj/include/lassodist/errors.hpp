#pragma once

#include <stdexcept>
#include <string>

namespace lassodist {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input (bad dimensions, negative tuning,
// non-finite entries, violated preconditions).
class InputError : public Error {
 public:
  using Error::Error;
};

// An operation was asked for on a problem outside its mathematical domain,
// e.g. a low-dimensional routine on a rank-deficient design.
class PreconditionError : public InputError {
 public:
  using InputError::InputError;
};

// Enumeration or quadrature dimension exceeds a hard cap.
class LimitError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown: LP failure, conditioning on a null event, etc.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lassodist
