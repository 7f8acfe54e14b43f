#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oracle {

double p1_eigenvalue(int k, double h, double length) {
  const double c = std::cos(k * std::numbers::pi * h / length);
  return 6.0 * (1.0 - c) / (h * h * (2.0 + c));
}

std::array<double, 2> cramer2(double a, double b, double c, double d, double e, double f) {
  const double det = a * d - b * c;
  return {(e * d - b * f) / det, (a * f - e * c) / det};
}

Dense Dense::identity(std::size_t size) {
  Dense d(size);
  for (std::size_t i = 0; i < size; ++i) d(i, i) = 1.0;
  return d;
}

Dense Dense::from(const bfo::linalg::SymTridiag& t) {
  Dense d(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) d(i, j) = t(i, j);
  }
  return d;
}

Dense operator+(const Dense& x, const Dense& y) {
  Dense r(x.n);
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] = x.a[i] + y.a[i];
  return r;
}

Dense operator*(Complex s, const Dense& x) {
  Dense r(x.n);
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] = s * x.a[i];
  return r;
}

Dense operator*(const Dense& x, const Dense& y) {
  Dense r(x.n);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t k = 0; k < x.n; ++k) {
      const Complex xik = x(i, k);
      for (std::size_t j = 0; j < x.n; ++j) r(i, j) += xik * y(k, j);
    }
  }
  return r;
}

CVec operator*(const Dense& x, const CVec& v) {
  CVec r(x.n);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t j = 0; j < x.n; ++j) r[i] += x(i, j) * v[j];
  }
  return r;
}

Dense adjoint(const Dense& x) {
  Dense r(x.n);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t j = 0; j < x.n; ++j) r(i, j) = std::conj(x(j, i));
  }
  return r;
}

double max_abs(const Dense& x) {
  double m = 0.0;
  for (const auto& v : x.a) m = std::max(m, std::abs(v));
  return m;
}

Dense solve(Dense A, Dense B) {
  const std::size_t n = A.n;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(A(r, col)) > std::abs(A(piv, col))) piv = r;
    }
    if (std::abs(A(piv, col)) == 0.0) throw std::runtime_error("oracle::solve: singular");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(A(col, j), A(piv, j));
        std::swap(B(col, j), B(piv, j));
      }
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const Complex f = A(r, col) / A(col, col);
      if (f == Complex{}) continue;
      for (std::size_t j = col; j < n; ++j) A(r, j) -= f * A(col, j);
      for (std::size_t j = 0; j < n; ++j) B(r, j) -= f * B(col, j);
    }
  }
  for (std::size_t jc = 0; jc < n; ++jc) {
    for (std::size_t ii = n; ii-- > 0;) {
      Complex s = B(ii, jc);
      for (std::size_t k = ii + 1; k < n; ++k) s -= A(ii, k) * B(k, jc);
      B(ii, jc) = s / A(ii, ii);
    }
  }
  return B;
}

CVec solve(const Dense& A, const CVec& b) {
  Dense rhs(A.n);
  for (std::size_t i = 0; i < A.n; ++i) rhs(i, 0) = b[i];
  const Dense x = solve(A, rhs);
  CVec out(A.n);
  for (std::size_t i = 0; i < A.n; ++i) out[i] = x(i, 0);
  return out;
}

Dense expm(const Dense& A) {
  double norm1 = 0.0;
  for (std::size_t j = 0; j < A.n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < A.n; ++i) col += std::abs(A(i, j));
    norm1 = std::max(norm1, col);
  }
  int squarings = 0;
  while (norm1 > 0.125) {
    norm1 *= 0.5;
    ++squarings;
  }
  const Dense S = std::ldexp(1.0, -squarings) * A;
  Dense result = Dense::identity(A.n);
  Dense term = Dense::identity(A.n);
  for (int k = 1; k <= 24; ++k) {
    term = Complex(1.0 / k) * (term * S);
    result = result + term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

RVec random_real(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  RVec v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

CVec random_complex(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CVec v(n);
  for (auto& x : v) {
    const double re = u(rng);
    x = Complex(re, u(rng));
  }
  return v;
}

RVec random_smooth(const bfo::fem::Mesh1D& mesh, int modes, std::uint64_t seed) {
  RVec coeffs = random_real(static_cast<std::size_t>(modes), seed);
  RVec out(mesh.dofs());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = mesh.node(i);
    for (int k = 1; k <= modes; ++k) {
      out[i] += coeffs[k - 1] * std::sin(k * std::numbers::pi * x / mesh.length);
    }
  }
  return out;
}

}  // namespace oracle
