#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bfo {

/// Vector or matrix sizes that do not agree.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A tridiagonal elimination hit a pivot below the magnitude guard.
class SingularPivot : public std::runtime_error {
 public:
  SingularPivot(std::size_t index, double magnitude)
      : std::runtime_error("singular pivot at row " + std::to_string(index) +
                           " (|pivot| = " + std::to_string(magnitude) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Iterative kernel (eigen-solver, power iteration) did not converge.
class ConvergenceFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The back-and-forth operator is not certified as a contraction (eta >= 1).
class NotContractive : public std::runtime_error {
 public:
  explicit NotContractive(double eta)
      : std::runtime_error("contraction not certified: eta_hat = " + std::to_string(eta) +
                           " >= 1"),
        eta_(eta) {}

  double eta() const noexcept { return eta_; }

 private:
  double eta_;
};

}  // namespace bfo
