#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace bfo::linalg {

using Complex = std::complex<double>;
using RVec = std::vector<double>;
using CVec = std::vector<Complex>;

/// Real symmetric tridiagonal matrix stored as its diagonal and first
/// off-diagonal. Holds the assembled mass, stiffness and observation Gram
/// matrices.
class SymTridiag {
 public:
  SymTridiag() = default;
  SymTridiag(RVec diag, RVec off);

  static SymTridiag identity(std::size_t n);
  static SymTridiag zeros(std::size_t n);

  std::size_t size() const noexcept { return diag_.size(); }
  const RVec& diag() const noexcept { return diag_; }
  const RVec& off() const noexcept { return off_; }

  /// Entry (i, j); zero outside the band.
  double operator()(std::size_t i, std::size_t j) const;

  /// y = A x. `x` and `y` must not alias.
  template <class T>
  void multiply(std::span<const T> x, std::span<T> y) const;

  template <class T>
  std::vector<T> multiply(std::span<const T> x) const {
    std::vector<T> y(size());
    multiply<T>(x, y);
    return y;
  }

  /// x^H A y.
  template <class T>
  T form(std::span<const T> x, std::span<const T> y) const;

 private:
  RVec diag_;
  RVec off_;
};

/// The matrix alpha*M + beta*K + gamma*B built from the three assembled
/// operators. Every per-step system of the observer schemes has this shape.
template <class T>
struct ShiftedSystem {
  ShiftedSystem(const SymTridiag& mass, const SymTridiag& stiffness,
                const SymTridiag& observation, T alpha, T beta, T gamma);

  const SymTridiag* mass;
  const SymTridiag* stiffness;
  const SymTridiag* observation;
  T alpha;
  T beta;
  T gamma;

  std::size_t size() const noexcept { return mass->size(); }

  /// y = (alpha M + beta K + gamma B) x.
  void multiply(std::span<const T> x, std::span<T> y) const;
};

/// LU factors of a (complex-)symmetric tridiagonal matrix, computed once by
/// Thomas elimination without pivoting and reused for every right-hand side.
template <class T>
class TridiagFactor {
 public:
  /// Pivots smaller than `pivot_guard` times the local row scale raise
  /// SingularPivot.
  static constexpr double pivot_guard = 1e-13;

  TridiagFactor(std::vector<T> diag, std::vector<T> off);
  explicit TridiagFactor(const ShiftedSystem<T>& system);

  std::size_t size() const noexcept { return pivot_.size(); }

  void solve_in_place(std::span<T> x) const;
  std::vector<T> solve(std::span<const T> rhs) const;

 private:
  std::vector<T> off_;
  std::vector<T> pivot_;
  std::vector<T> multiplier_;
};

/// Solves (alpha M + beta K + gamma B) x = rhs.
template <class T>
std::vector<T> solve_tridiag(const ShiftedSystem<T>& system, std::span<const T> rhs);

/// Full spectrum of the symmetric-definite pencil K v = lambda M v.
struct PencilEig {
  RVec values;   ///< ascending
  RVec vectors;  ///< column-major, M-orthonormal, vector j at [j*n, (j+1)*n)
  std::size_t n = 0;

  std::span<const double> vector(std::size_t j) const {
    return {vectors.data() + j * n, n};
  }
};

/// Eigen-decomposition of the pencil (K, M): Cholesky congruence by M,
/// Householder tridiagonalization, then implicit QL. Dense, O(n^3); used for
/// exact propagation and as a cross-check oracle.
PencilEig pencil_eigs(const SymTridiag& stiffness, const SymTridiag& mass);

inline constexpr std::size_t kPencilMaxSize = 4096;

template <class T>
double max_abs(std::span<const T> x);

}  // namespace bfo::linalg
