#pragma once

#include <stdexcept>
#include <string>

namespace actm {

/// Invalid model data: parameters, indices, or dimensions.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario or report text that cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A density left [0, jam] by more than round-off.
class DomainViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The observer synthesis program admits no solution.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double certificate_residual)
      : std::runtime_error(what), certificate_residual_(certificate_residual) {}

  // Relative residual of the Farkas-type certificate (A(X) ~ 0, <C,X> = 1).
  double certificate_residual() const noexcept { return certificate_residual_; }

 private:
  double certificate_residual_;
};

/// Interior-point iterations ran out or a returned point failed verification.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace actm
