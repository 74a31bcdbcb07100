#pragma once

#include <stdexcept>
#include <string>

namespace qcwass {

// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

// Constraint list cannot define a non-empty perturbation class.
class EmptyClassError : public Error {
 public:
  EmptyClassError(std::string what, std::size_t first, std::size_t second)
      : Error(std::move(what)), first_(first), second_(second) {}

  // Indices (in alpha order) of the first offending pair.
  std::size_t first_index() const noexcept { return first_; }
  std::size_t second_index() const noexcept { return second_; }

 private:
  std::size_t first_;
  std::size_t second_;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LinearAlgebraError : public Error {
 public:
  using Error::Error;
};

}  // namespace qcwass
