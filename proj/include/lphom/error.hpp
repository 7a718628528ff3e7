#pragma once

#include <stdexcept>
#include <string>

namespace lph {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition: bad dimension, singular transform, invalid geometry.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A linear solve that did not reach its tolerance, or a failed factorization.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace lph
