#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace msym {

/// Root of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text; `offset` is the byte position of the problem.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed text naming a symbol that is not valid in the active model.
class SymbolError : public Error {
 public:
  using Error::Error;
};

/// Numeric evaluation left the real domain (log of a non-positive number,
/// even root of a negative number, division by zero).
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subexpression)
      : Error(what + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}
  const std::string& subexpression() const { return subexpression_; }

 private:
  std::string subexpression_;
};

/// Model or form data that violates a structural invariant.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A construction requiring a regular (or hyper-regular) Lagrangian met a
/// degenerate Hessian or a non-invertible Legendre map.
class RegularityError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace msym
