#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bfo/linalg.hpp"

namespace bfo::fem {

using linalg::Complex;
using linalg::CVec;
using linalg::RVec;
using linalg::SymTridiag;

/// Uniform partition of [0, L] with homogeneous Dirichlet conditions. Unknowns
/// live on the interior nodes x_i = i h, i = 1..n_cells-1.
struct Mesh1D {
  Mesh1D(double length, int n_cells);

  double length = 1.0;
  int n_cells = 2;

  double h() const noexcept { return length / n_cells; }
  std::size_t dofs() const noexcept { return static_cast<std::size_t>(n_cells - 1); }
  /// Coordinate of interior unknown `i` (0-based), i.e. node i + 1.
  double node(std::size_t i) const noexcept { return static_cast<double>(i + 1) * h(); }
};

/// Multiplicative observation weight c(x), so that C z = c z.
///
/// The bump profile rises from 0 at `a` to 1 over the first quarter of
/// [a, b] with a smoothstep of order m (C^m at the joins), stays at 1 on the
/// middle half and falls back symmetrically. Constant profiles exist for
/// degenerate checks (c = 0 gives B = 0, c = 1 gives B = M).
class ObservationProfile {
 public:
  enum class Kind { bump, constant };

  static ObservationProfile bump(double a, double b, int smoothness);
  static ObservationProfile constant(double value);
  /// Default window [0.2, 0.8] scaled to `length`, smoothness 2.
  static ObservationProfile standard(double length = 1.0);

  double operator()(double x) const;

  Kind kind() const noexcept { return kind_; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  int smoothness() const noexcept { return m_; }
  double value() const noexcept { return value_; }

  std::string describe() const;

  bool operator==(const ObservationProfile&) const = default;

 private:
  Kind kind_ = Kind::constant;
  double a_ = 0.0;
  double b_ = 0.0;
  int m_ = 0;
  double value_ = 0.0;
};

/// Smoothstep of order m on [0, 1]: 0 and 1 at the ends with m vanishing
/// derivatives on both sides.
double smoothstep(int m, double s);

/// Closed-form scalar field on [0, L] used for truths and projections.
class FieldSpec {
 public:
  enum class Kind { sine_sum, poly_bump, custom };

  /// sum_k coefficients[k-1] * sin(k pi x / L).
  static FieldSpec sine_sum(std::vector<double> coefficients, double length = 1.0);
  /// amplitude * (x (L - x))^3 / (L/2)^6: vanishes with its second derivative
  /// at both ends, so it lies in D(A_0^2).
  static FieldSpec poly_bump(double amplitude, double length = 1.0);
  /// Arbitrary callable with its derivative. Regularity is not checked.
  static FieldSpec custom(std::function<double(double)> value,
                          std::function<double(double)> derivative, std::string label);

  double value(double x) const;
  double derivative(double x) const;

  Kind kind() const noexcept { return kind_; }
  double length() const noexcept { return length_; }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  double amplitude() const noexcept { return amplitude_; }
  /// True for the closed forms known to satisfy the Dirichlet conditions and
  /// to lie in D(A_0^2).
  bool regular() const noexcept { return kind_ != Kind::custom; }
  std::string describe() const;

  FieldSpec scaled(double factor) const;

 private:
  Kind kind_ = Kind::sine_sum;
  double length_ = 1.0;
  std::vector<double> coefficients_;
  double amplitude_ = 0.0;
  std::function<double(double)> value_fn_;
  std::function<double(double)> derivative_fn_;
  std::string label_;
};

/// Assembled P1 operators.
struct FemOperators {
  Mesh1D mesh;
  ObservationProfile profile;
  SymTridiag mass;               ///< M_ij = int phi_i phi_j
  SymTridiag stiffness;          ///< K_ij = int phi_i' phi_j'
  SymTridiag observation;        ///< B_ij = int c^2 phi_i phi_j  (C*C)
  SymTridiag observation_weight; ///< W_ij = int c phi_i phi_j    (C* applied to P1 data)

  std::size_t dofs() const noexcept { return mass.size(); }
};

/// 4-point Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::array<double, 4> points;
  std::array<double, 4> weights;
};
const GaussRule& gauss4();

FemOperators assemble(const Mesh1D& mesh, const ObservationProfile& profile);

/// Entries int f phi_i, 4-point Gauss per element.
RVec load_vector(const Mesh1D& mesh, const std::function<double(double)>& f);

/// Nodal values of `field` on the interior nodes.
RVec interpolate(const Mesh1D& mesh, const FieldSpec& field);

/// H^1_0-orthogonal projection onto the P1 space: K u = (int field' phi_i').
RVec project_pi_h(const FemOperators& ops, const FieldSpec& field);

/// Discrete norm in D(A_0^alpha) for alpha in {0, 1/2, 1, 3/2, 2}, defined
/// through M^{-1} K solves.
double norm_alpha(const FemOperators& ops, std::span<const double> u, double alpha);
double norm_alpha(const FemOperators& ops, std::span<const Complex> u, double alpha);

/// ||field - u_h||_{L^2} and |field - u_h|_{H^1} by composite Gauss
/// quadrature (`subdivisions` sub-intervals per element). For complex u_h the
/// imaginary part counts against a real field.
double l2_error(const Mesh1D& mesh, const FieldSpec& field, std::span<const double> u,
                int subdivisions = 4);
double l2_error(const Mesh1D& mesh, const FieldSpec& field, std::span<const Complex> u,
                int subdivisions = 4);
double h1_seminorm_error(const Mesh1D& mesh, const FieldSpec& field, std::span<const double> u,
                         int subdivisions = 4);

/// Nodal injection from a mesh `factor` times finer onto `coarse`.
template <class T>
std::vector<T> restrict_by_injection(std::span<const T> fine, const Mesh1D& coarse, int factor);

}  // namespace bfo::fem
