#pragma once

// Independent reference computations for the tests. Nothing here calls the
// tridiagonal or eigen kernels under test.

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "bfo/fem.hpp"
#include "bfo/linalg.hpp"

namespace oracle {

using Complex = std::complex<double>;
using CVec = std::vector<Complex>;
using RVec = std::vector<double>;

/// k-th generalized eigenvalue of the uniform P1 Dirichlet pencil on (0, L).
double p1_eigenvalue(int k, double h, double length = 1.0);

/// Solution of [[a, b], [c, d]] x = (e, f) by Cramer's rule.
std::array<double, 2> cramer2(double a, double b, double c, double d, double e, double f);

/// Dense complex square matrix, row-major.
struct Dense {
  std::size_t n = 0;
  std::vector<Complex> a;

  explicit Dense(std::size_t size = 0) : n(size), a(size * size) {}
  static Dense identity(std::size_t size);
  static Dense from(const bfo::linalg::SymTridiag& t);

  Complex& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  Complex operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

Dense operator+(const Dense& x, const Dense& y);
Dense operator*(Complex s, const Dense& x);
Dense operator*(const Dense& x, const Dense& y);
CVec operator*(const Dense& x, const CVec& v);
Dense adjoint(const Dense& x);
double max_abs(const Dense& x);

/// X with A X = B, Gaussian elimination with partial pivoting.
Dense solve(Dense A, Dense B);
CVec solve(const Dense& A, const CVec& b);

/// exp(A) by scaling and squaring of a truncated Taylor series.
Dense expm(const Dense& A);

RVec random_real(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0);
CVec random_complex(std::size_t n, std::uint64_t seed);

/// Nodal interpolant of sum_{k <= modes} a_k sin(k pi x / L), a_k uniform in
/// [-1, 1]: a random state that stays in the smooth range of the scheme.
RVec random_smooth(const bfo::fem::Mesh1D& mesh, int modes, std::uint64_t seed);

}  // namespace oracle
