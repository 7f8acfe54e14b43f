#include "bfo/fem.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "bfo/errors.hpp"

namespace bfo::fem {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Weighted P1 mass matrix int w phi_i phi_j with 4-point Gauss per element.
SymTridiag weighted_mass(const Mesh1D& mesh, const std::function<double(double)>& w) {
  const std::size_t n = mesh.dofs();
  RVec diag(n, 0.0), off(n - 1, 0.0);
  const double h = mesh.h();
  const auto& g = gauss4();
  for (int e = 0; e < mesh.n_cells; ++e) {
    const double x0 = e * h;
    double m00 = 0.0, m01 = 0.0, m11 = 0.0;
    for (std::size_t q = 0; q < 4; ++q) {
      const double s = 0.5 * (g.points[q] + 1.0);
      const double x = x0 + s * h;
      const double wq = 0.5 * h * g.weights[q] * w(x);
      const double pl = 1.0 - s;
      const double pr = s;
      m00 += wq * pl * pl;
      m01 += wq * pl * pr;
      m11 += wq * pr * pr;
    }
    // Element e couples nodes e and e+1; interior dof index = node - 1.
    const bool left_interior = e >= 1;
    const bool right_interior = e + 1 <= mesh.n_cells - 1;
    if (left_interior) diag[e - 1] += m00;
    if (right_interior) diag[e] += m11;
    if (left_interior && right_interior) off[e - 1] += m01;
  }
  return {std::move(diag), std::move(off)};
}

SymTridiag stiffness_matrix(const Mesh1D& mesh) {
  const std::size_t n = mesh.dofs();
  const double inv_h = 1.0 / mesh.h();
  return {RVec(n, 2.0 * inv_h), RVec(n - 1, -inv_h)};
}

template <class T>
double norm_alpha_impl(const FemOperators& ops, std::span<const T> u, double alpha) {
  if (u.size() != ops.dofs()) {
    throw DimensionMismatch("norm_alpha: vector has " + std::to_string(u.size()) +
                            " entries, mesh has " + std::to_string(ops.dofs()));
  }
  auto m_norm = [&](std::span<const T> v) { return std::sqrt(std::abs(ops.mass.form<T>(v, v))); };
  auto k_norm = [&](std::span<const T> v) {
    return std::sqrt(std::abs(ops.stiffness.form<T>(v, v)));
  };
  auto apply_operator = [&](std::span<const T> v) {
    std::vector<T> ku = ops.stiffness.multiply<T>(v);
    const linalg::TridiagFactor<T> mass_factor(std::vector<T>(ops.mass.diag().begin(),
                                                              ops.mass.diag().end()),
                                               std::vector<T>(ops.mass.off().begin(),
                                                              ops.mass.off().end()));
    mass_factor.solve_in_place(ku);
    return ku;
  };
  if (alpha == 0.0) return m_norm(u);
  if (alpha == 0.5) return k_norm(u);
  const std::vector<T> w = apply_operator(u);
  if (alpha == 1.0) return m_norm(w);
  if (alpha == 1.5) return k_norm(w);
  if (alpha == 2.0) return m_norm(apply_operator(w));
  throw std::invalid_argument("norm_alpha: unsupported alpha " + std::to_string(alpha) +
                              " (expected 0, 0.5, 1, 1.5 or 2)");
}

// Evaluates the P1 function with interior coefficients u on element e at
// local coordinate s in [0, 1]; also returns its derivative.
template <class T>
std::pair<T, T> p1_eval(std::span<const T> u, int n_cells, int e, double s, double h) {
  const T left = e >= 1 ? u[e - 1] : T{};
  const T right = e + 1 <= n_cells - 1 ? u[e] : T{};
  return {left * (1.0 - s) + right * s, (right - left) / h};
}

template <class T>
double l2_error_impl(const Mesh1D& mesh, const FieldSpec& field, std::span<const T> u,
                     int subdivisions) {
  if (u.size() != mesh.dofs()) throw DimensionMismatch("l2_error: vector size mismatch");
  const auto& g = gauss4();
  const double h = mesh.h();
  const double hs = h / subdivisions;
  double acc = 0.0;
  for (int e = 0; e < mesh.n_cells; ++e) {
    for (int sub = 0; sub < subdivisions; ++sub) {
      for (std::size_t q = 0; q < 4; ++q) {
        const double s = (sub + 0.5 * (g.points[q] + 1.0)) / subdivisions;
        const double x = (e + s) * h;
        const T uh = p1_eval(u, mesh.n_cells, e, s, h).first;
        acc += 0.5 * hs * g.weights[q] * std::norm(field.value(x) - uh);
      }
    }
  }
  return std::sqrt(acc);
}

}  // namespace

Mesh1D::Mesh1D(double len, int cells) : length(len), n_cells(cells) {
  if (!(len > 0.0)) throw std::invalid_argument("Mesh1D: length must be positive");
  if (cells < 2) throw std::invalid_argument("Mesh1D: n_cells must be at least 2");
}

double smoothstep(int m, double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double sum = 0.0;
  for (int k = 0; k <= m; ++k) {
    sum += binomial(m + k, k) * binomial(2 * m + 1, m - k) * std::pow(-s, k);
  }
  return std::pow(s, m + 1) * sum;
}

ObservationProfile ObservationProfile::bump(double a, double b, int smoothness) {
  if (!(a < b)) throw std::invalid_argument("ObservationProfile: need a < b");
  if (smoothness < 0 || smoothness > 8) {
    throw std::invalid_argument("ObservationProfile: smoothness must be in [0, 8]");
  }
  ObservationProfile p;
  p.kind_ = Kind::bump;
  p.a_ = a;
  p.b_ = b;
  p.m_ = smoothness;
  p.value_ = 1.0;
  return p;
}

ObservationProfile ObservationProfile::constant(double value) {
  if (value < 0.0 || value > 1.0) {
    throw std::invalid_argument("ObservationProfile: constant weight must lie in [0, 1]");
  }
  ObservationProfile p;
  p.kind_ = Kind::constant;
  p.value_ = value;
  return p;
}

ObservationProfile ObservationProfile::standard(double length) {
  return bump(0.2 * length, 0.8 * length, 2);
}

double ObservationProfile::operator()(double x) const {
  if (kind_ == Kind::constant) return value_;
  if (x <= a_ || x >= b_) return 0.0;
  const double ramp = 0.25 * (b_ - a_);
  if (x < a_ + ramp) return smoothstep(m_, (x - a_) / ramp);
  if (x > b_ - ramp) return smoothstep(m_, (b_ - x) / ramp);
  return 1.0;
}

std::string ObservationProfile::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (kind_ == Kind::constant) {
    os << "constant(" << value_ << ")";
  } else {
    os << "bump(a=" << a_ << ",b=" << b_ << ",m=" << m_ << ")";
  }
  return os.str();
}

FieldSpec FieldSpec::sine_sum(std::vector<double> coefficients, double length) {
  FieldSpec f;
  f.kind_ = Kind::sine_sum;
  f.coefficients_ = std::move(coefficients);
  f.length_ = length;
  return f;
}

FieldSpec FieldSpec::poly_bump(double amplitude, double length) {
  FieldSpec f;
  f.kind_ = Kind::poly_bump;
  f.amplitude_ = amplitude;
  f.length_ = length;
  return f;
}

FieldSpec FieldSpec::custom(std::function<double(double)> value,
                            std::function<double(double)> derivative, std::string label) {
  FieldSpec f;
  f.kind_ = Kind::custom;
  f.value_fn_ = std::move(value);
  f.derivative_fn_ = std::move(derivative);
  f.label_ = std::move(label);
  return f;
}

double FieldSpec::value(double x) const {
  switch (kind_) {
    case Kind::sine_sum: {
      double s = 0.0;
      for (std::size_t k = 0; k < coefficients_.size(); ++k) {
        s += coefficients_[k] * std::sin((k + 1) * std::numbers::pi * x / length_);
      }
      return s;
    }
    case Kind::poly_bump: {
      const double half = 0.5 * length_;
      const double q = x * (length_ - x) / (half * half);
      return amplitude_ * q * q * q;
    }
    case Kind::custom:
      return value_fn_(x);
  }
  return 0.0;
}

double FieldSpec::derivative(double x) const {
  switch (kind_) {
    case Kind::sine_sum: {
      double s = 0.0;
      for (std::size_t k = 0; k < coefficients_.size(); ++k) {
        const double w = (k + 1) * std::numbers::pi / length_;
        s += coefficients_[k] * w * std::cos(w * x);
      }
      return s;
    }
    case Kind::poly_bump: {
      const double half = 0.5 * length_;
      const double q = x * (length_ - x) / (half * half);
      return amplitude_ * 3.0 * q * q * (length_ - 2.0 * x) / (half * half);
    }
    case Kind::custom:
      return derivative_fn_(x);
  }
  return 0.0;
}

std::string FieldSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::sine_sum:
      os << "sine_sum(";
      for (std::size_t k = 0; k < coefficients_.size(); ++k) {
        os << (k ? "," : "") << coefficients_[k];
      }
      os << ")";
      break;
    case Kind::poly_bump:
      os << "poly_bump(" << amplitude_ << ")";
      break;
    case Kind::custom:
      os << "custom(" << label_ << ")";
      break;
  }
  return os.str();
}

FieldSpec FieldSpec::scaled(double factor) const {
  FieldSpec f = *this;
  switch (kind_) {
    case Kind::sine_sum:
      for (auto& c : f.coefficients_) c *= factor;
      break;
    case Kind::poly_bump:
      f.amplitude_ *= factor;
      break;
    case Kind::custom: {
      auto v = value_fn_;
      auto d = derivative_fn_;
      f.value_fn_ = [v, factor](double x) { return factor * v(x); };
      f.derivative_fn_ = [d, factor](double x) { return factor * d(x); };
      break;
    }
  }
  return f;
}

const GaussRule& gauss4() {
  static const GaussRule rule = [] {
    const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
    const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
    const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
    const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
    return GaussRule{{-b, -a, a, b}, {wb, wa, wa, wb}};
  }();
  return rule;
}

FemOperators assemble(const Mesh1D& mesh, const ObservationProfile& profile) {
  if (profile.kind() == ObservationProfile::Kind::bump &&
      !(profile.a() > 0.0 && profile.b() < mesh.length)) {
    std::ostringstream os;
    os << "observation window (a, b) = (" << profile.a() << ", " << profile.b()
       << ") must lie strictly inside (0, " << mesh.length << ")";
    throw std::invalid_argument(os.str());
  }
  FemOperators ops{mesh, profile, {}, {}, {}, {}};
  ops.mass = weighted_mass(mesh, [](double) { return 1.0; });
  ops.stiffness = stiffness_matrix(mesh);
  ops.observation = weighted_mass(mesh, [&](double x) {
    const double c = profile(x);
    return c * c;
  });
  ops.observation_weight = weighted_mass(mesh, [&](double x) { return profile(x); });
  return ops;
}

RVec load_vector(const Mesh1D& mesh, const std::function<double(double)>& f) {
  RVec out(mesh.dofs(), 0.0);
  const double h = mesh.h();
  const auto& g = gauss4();
  for (int e = 0; e < mesh.n_cells; ++e) {
    double left = 0.0, right = 0.0;
    for (std::size_t q = 0; q < 4; ++q) {
      const double s = 0.5 * (g.points[q] + 1.0);
      const double wq = 0.5 * h * g.weights[q] * f((e + s) * h);
      left += wq * (1.0 - s);
      right += wq * s;
    }
    if (e >= 1) out[e - 1] += left;
    if (e + 1 <= mesh.n_cells - 1) out[e] += right;
  }
  return out;
}

RVec interpolate(const Mesh1D& mesh, const FieldSpec& field) {
  RVec out(mesh.dofs());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = field.value(mesh.node(i));
  return out;
}

RVec project_pi_h(const FemOperators& ops, const FieldSpec& field) {
  const Mesh1D& mesh = ops.mesh;
  const double h = mesh.h();
  const auto& g = gauss4();
  RVec rhs(mesh.dofs(), 0.0);
  for (int e = 0; e < mesh.n_cells; ++e) {
    double integral = 0.0;  // int_e field'
    for (std::size_t q = 0; q < 4; ++q) {
      const double s = 0.5 * (g.points[q] + 1.0);
      integral += 0.5 * h * g.weights[q] * field.derivative((e + s) * h);
    }
    // Hat of node e has slope -1/h on element e, hat of node e+1 has +1/h.
    if (e >= 1) rhs[e - 1] -= integral / h;
    if (e + 1 <= mesh.n_cells - 1) rhs[e] += integral / h;
  }
  const linalg::TridiagFactor<double> k_factor(ops.stiffness.diag(), ops.stiffness.off());
  k_factor.solve_in_place(rhs);
  return rhs;
}

double norm_alpha(const FemOperators& ops, std::span<const double> u, double alpha) {
  return norm_alpha_impl<double>(ops, u, alpha);
}

double norm_alpha(const FemOperators& ops, std::span<const Complex> u, double alpha) {
  return norm_alpha_impl<Complex>(ops, u, alpha);
}

double l2_error(const Mesh1D& mesh, const FieldSpec& field, std::span<const double> u,
                int subdivisions) {
  return l2_error_impl<double>(mesh, field, u, subdivisions);
}

double l2_error(const Mesh1D& mesh, const FieldSpec& field, std::span<const Complex> u,
                int subdivisions) {
  return l2_error_impl<Complex>(mesh, field, u, subdivisions);
}

double h1_seminorm_error(const Mesh1D& mesh, const FieldSpec& field, std::span<const double> u,
                         int subdivisions) {
  if (u.size() != mesh.dofs()) throw DimensionMismatch("h1_seminorm_error: size mismatch");
  const auto& g = gauss4();
  const double h = mesh.h();
  const double hs = h / subdivisions;
  double acc = 0.0;
  for (int e = 0; e < mesh.n_cells; ++e) {
    const double slope = p1_eval<double>(u, mesh.n_cells, e, 0.0, h).second;
    for (int sub = 0; sub < subdivisions; ++sub) {
      for (std::size_t q = 0; q < 4; ++q) {
        const double s = (sub + 0.5 * (g.points[q] + 1.0)) / subdivisions;
        const double d = field.derivative((e + s) * h) - slope;
        acc += 0.5 * hs * g.weights[q] * d * d;
      }
    }
  }
  return std::sqrt(acc);
}

template <class T>
std::vector<T> restrict_by_injection(std::span<const T> fine, const Mesh1D& coarse, int factor) {
  if (factor < 1) throw std::invalid_argument("restrict_by_injection: factor must be >= 1");
  const std::size_t expected = static_cast<std::size_t>(coarse.n_cells) * factor - 1;
  if (fine.size() != expected) {
    throw DimensionMismatch("restrict_by_injection: fine vector has " +
                            std::to_string(fine.size()) + " entries, expected " +
                            std::to_string(expected));
  }
  std::vector<T> out(coarse.dofs());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fine[(i + 1) * factor - 1];
  return out;
}

template std::vector<double> restrict_by_injection<double>(std::span<const double>,
                                                           const Mesh1D&, int);
template std::vector<Complex> restrict_by_injection<Complex>(std::span<const Complex>,
                                                             const Mesh1D&, int);

}  // namespace bfo::fem
