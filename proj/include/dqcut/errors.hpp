#pragma once

#include <stdexcept>
#include <string>

namespace dqcut {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed instance or manifest text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a function (e.g. x outside [L, U]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Factorization failure, loss of definiteness, non-finite data.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The feasible set {Ax = b, L <= x <= U} is empty.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace dqcut
