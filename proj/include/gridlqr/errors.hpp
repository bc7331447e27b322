#pragma once

#include <stdexcept>
#include <string>

namespace gridlqr {

// Base class for all library failures. Stage labels are prepended by the
// orchestration layer, so messages here stay local to the failing routine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid argument or configuration (alpha >= 1, bad step size, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

// Raised when a matrix that must be inverted is numerically singular.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class UnstabilizablePair : public Error {
 public:
  using Error::Error;
};

// The stable invariant subspace basis U11 of the Hamiltonian is too badly
// conditioned to recover P.
class IllConditionedU11 : public SingularMatrix {
 public:
  using SingularMatrix::SingularMatrix;
};

class QpFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace gridlqr
