#include "bfo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "bfo/errors.hpp"

namespace bfo::linalg {

namespace {

template <class T>
T conj_if(const T& x) {
  if constexpr (std::is_same_v<T, Complex>) {
    return std::conj(x);
  } else {
    return x;
  }
}

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a) + " vs " +
                            std::to_string(b));
  }
}

}  // namespace

SymTridiag::SymTridiag(RVec diag, RVec off) : diag_(std::move(diag)), off_(std::move(off)) {
  if (diag_.empty()) {
    throw DimensionMismatch("SymTridiag: dimension must be at least 1");
  }
  require_same(off_.size() + 1, diag_.size(), "SymTridiag off-diagonal length");
}

SymTridiag SymTridiag::identity(std::size_t n) { return {RVec(n, 1.0), RVec(n - 1, 0.0)}; }

SymTridiag SymTridiag::zeros(std::size_t n) { return {RVec(n, 0.0), RVec(n - 1, 0.0)}; }

double SymTridiag::operator()(std::size_t i, std::size_t j) const {
  if (i == j) return diag_[i];
  if (i + 1 == j) return off_[i];
  if (j + 1 == i) return off_[j];
  return 0.0;
}

template <class T>
void SymTridiag::multiply(std::span<const T> x, std::span<T> y) const {
  const std::size_t n = size();
  require_same(x.size(), n, "SymTridiag::multiply x");
  require_same(y.size(), n, "SymTridiag::multiply y");
  for (std::size_t i = 0; i < n; ++i) {
    T acc = diag_[i] * x[i];
    if (i > 0) acc += off_[i - 1] * x[i - 1];
    if (i + 1 < n) acc += off_[i] * x[i + 1];
    y[i] = acc;
  }
}

template <class T>
T SymTridiag::form(std::span<const T> x, std::span<const T> y) const {
  const std::size_t n = size();
  require_same(x.size(), n, "SymTridiag::form x");
  require_same(y.size(), n, "SymTridiag::form y");
  T acc{};
  for (std::size_t i = 0; i < n; ++i) {
    T row = diag_[i] * y[i];
    if (i > 0) row += off_[i - 1] * y[i - 1];
    if (i + 1 < n) row += off_[i] * y[i + 1];
    acc += conj_if(x[i]) * row;
  }
  return acc;
}

template <class T>
ShiftedSystem<T>::ShiftedSystem(const SymTridiag& m, const SymTridiag& k, const SymTridiag& b,
                                T a, T be, T g)
    : mass(&m), stiffness(&k), observation(&b), alpha(a), beta(be), gamma(g) {
  require_same(k.size(), m.size(), "ShiftedSystem stiffness");
  require_same(b.size(), m.size(), "ShiftedSystem observation");
}

template <class T>
void ShiftedSystem<T>::multiply(std::span<const T> x, std::span<T> y) const {
  const std::size_t n = size();
  require_same(x.size(), n, "ShiftedSystem::multiply x");
  require_same(y.size(), n, "ShiftedSystem::multiply y");
  const auto& md = mass->diag();
  const auto& mo = mass->off();
  const auto& kd = stiffness->diag();
  const auto& ko = stiffness->off();
  const auto& bd = observation->diag();
  const auto& bo = observation->off();
  for (std::size_t i = 0; i < n; ++i) {
    T acc = (alpha * md[i] + beta * kd[i] + gamma * bd[i]) * x[i];
    if (i > 0) acc += (alpha * mo[i - 1] + beta * ko[i - 1] + gamma * bo[i - 1]) * x[i - 1];
    if (i + 1 < n) acc += (alpha * mo[i] + beta * ko[i] + gamma * bo[i]) * x[i + 1];
    y[i] = acc;
  }
}

template <class T>
TridiagFactor<T>::TridiagFactor(std::vector<T> diag, std::vector<T> off)
    : off_(std::move(off)), pivot_(std::move(diag)), multiplier_(pivot_.size(), T{}) {
  const std::size_t n = pivot_.size();
  if (n == 0) throw DimensionMismatch("TridiagFactor: empty system");
  require_same(off_.size() + 1, n, "TridiagFactor off-diagonal length");
  auto row_scale = [&](std::size_t i) {
    double s = std::abs(pivot_[i]);
    if (i > 0) s = std::max(s, std::abs(off_[i - 1]));
    if (i + 1 < n) s = std::max(s, std::abs(off_[i]));
    return s;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = row_scale(i);
    if (i > 0) {
      multiplier_[i] = off_[i - 1] / pivot_[i - 1];
      pivot_[i] -= multiplier_[i] * off_[i - 1];
    }
    const double mag = std::abs(pivot_[i]);
    if (!(mag > pivot_guard * scale) || mag == 0.0) throw SingularPivot(i, mag);
  }
}

template <class T>
TridiagFactor<T>::TridiagFactor(const ShiftedSystem<T>& s)
    : TridiagFactor(
          [&] {
            std::vector<T> d(s.size());
            for (std::size_t i = 0; i < d.size(); ++i) {
              d[i] = s.alpha * s.mass->diag()[i] + s.beta * s.stiffness->diag()[i] +
                     s.gamma * s.observation->diag()[i];
            }
            return d;
          }(),
          [&] {
            std::vector<T> o(s.size() - 1);
            for (std::size_t i = 0; i < o.size(); ++i) {
              o[i] = s.alpha * s.mass->off()[i] + s.beta * s.stiffness->off()[i] +
                     s.gamma * s.observation->off()[i];
            }
            return o;
          }()) {}

template <class T>
void TridiagFactor<T>::solve_in_place(std::span<T> x) const {
  const std::size_t n = size();
  require_same(x.size(), n, "TridiagFactor::solve rhs");
  for (std::size_t i = 1; i < n; ++i) x[i] -= multiplier_[i] * x[i - 1];
  x[n - 1] /= pivot_[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (x[i] - off_[i] * x[i + 1]) / pivot_[i];
}

template <class T>
std::vector<T> TridiagFactor<T>::solve(std::span<const T> rhs) const {
  std::vector<T> x(rhs.begin(), rhs.end());
  solve_in_place(x);
  return x;
}

template <class T>
std::vector<T> solve_tridiag(const ShiftedSystem<T>& system, std::span<const T> rhs) {
  require_same(rhs.size(), system.size(), "solve_tridiag rhs");
  return TridiagFactor<T>(system).solve(rhs);
}

template <class T>
double max_abs(std::span<const T> x) {
  double m = 0.0;
  for (const auto& v : x) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------
// Pencil eigensolver.

namespace {

// Householder reduction of a dense symmetric matrix (row-major, n x n) to
// tridiagonal form. On exit `a` holds the accumulated orthogonal transform,
// `d` the diagonal and `e` the subdiagonal in e[1..n-1].
void householder_tridiagonalize(std::vector<double>& a, std::size_t n, RVec& d, RVec& e) {
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) d[j] = at(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = at(i - 1, j);
        at(i, j) = 0.0;
        at(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        at(j, i) = f;
        g = e[j] + at(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += at(k, j) * d[k];
          e[k] += at(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) at(k, j) -= (f * e[k] + g * d[k]);
        d[j] = at(i - 1, j);
        at(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  // Accumulate transformations.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    at(n - 1, i) = at(i, i);
    at(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = at(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += at(k, i + 1) * at(k, j);
        for (std::size_t k = 0; k <= i; ++k) at(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) at(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = at(n - 1, j);
    at(n - 1, j) = 0.0;
  }
  at(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL with shifts on the tridiagonal (d, e); eigenvectors accumulated
// into the columns of `a`. Sorted ascending on exit.
void implicit_ql(std::vector<double>& a, std::size_t n, RVec& d, RVec& e) {
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::pow(2.0, -52.0);
  const int max_sweeps = 60;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m == n) m = n - 1;

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_sweeps) {
          throw ConvergenceFailure("pencil_eigs: QL iteration did not converge at index " +
                                   std::to_string(l));
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0;
        double s2 = 0.0;
        for (std::size_t i = m; i-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (std::size_t k = 0; k < n; ++k) {
            h = at(k, i + 1);
            at(k, i + 1) = s * at(k, i) + c * h;
            at(k, i) = c * at(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }

  // Selection sort keeps the column swaps explicit.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::size_t k = i;
    double p = d[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d[j] < p) {
        k = j;
        p = d[j];
      }
    }
    if (k != i) {
      d[k] = d[i];
      d[i] = p;
      for (std::size_t j = 0; j < n; ++j) std::swap(at(j, i), at(j, k));
    }
  }
}

}  // namespace

PencilEig pencil_eigs(const SymTridiag& stiffness, const SymTridiag& mass) {
  const std::size_t n = mass.size();
  require_same(stiffness.size(), n, "pencil_eigs stiffness");
  if (n > kPencilMaxSize) {
    throw DimensionMismatch("pencil_eigs: dimension " + std::to_string(n) +
                            " exceeds oracle limit " + std::to_string(kPencilMaxSize));
  }

  // M = L L^T with L lower bidiagonal (ld on the diagonal, ls below it).
  RVec ld(n), ls(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    double piv = mass.diag()[i];
    if (i > 0) {
      ls[i - 1] = mass.off()[i - 1] / ld[i - 1];
      piv -= ls[i - 1] * ls[i - 1];
    }
    if (!(piv > 0.0)) {
      throw ConvergenceFailure("pencil_eigs: mass matrix not positive definite at row " +
                               std::to_string(i));
    }
    ld[i] = std::sqrt(piv);
  }
  auto forward_solve = [&](std::span<double> v) {
    v[0] /= ld[0];
    for (std::size_t i = 1; i < n; ++i) v[i] = (v[i] - ls[i - 1] * v[i - 1]) / ld[i];
  };
  auto backward_solve_transposed = [&](std::span<double> v) {
    v[n - 1] /= ld[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) v[i] = (v[i] - ls[i] * v[i + 1]) / ld[i];
  };

  // C = L^{-1} K L^{-T}. First W = L^{-1} K column by column (K symmetric, so
  // rows of K are its columns), then C = L^{-1} W^T.
  std::vector<double> w(n * n, 0.0);  // row-major, w[j*n + i] = W(i, j) stored per column j
  for (std::size_t j = 0; j < n; ++j) {
    std::span<double> col(w.data() + j * n, n);
    for (std::size_t i = 0; i < n; ++i) col[i] = stiffness(i, j);
    forward_solve(col);
  }
  // Row i of W is now column i of W^T, i.e. entries w[j*n + i] over j.
  std::vector<double> c(n * n, 0.0);
  std::vector<double> tmp(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) tmp[j] = w[j * n + i];
    forward_solve(tmp);
    for (std::size_t j = 0; j < n; ++j) c[j * n + i] = tmp[j];
  }
  // Symmetrize round-off.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (c[i * n + j] + c[j * n + i]);
      c[i * n + j] = avg;
      c[j * n + i] = avg;
    }
  }

  PencilEig out;
  out.n = n;
  RVec d, e;
  if (n == 1) {
    d = {c[0]};
    c[0] = 1.0;
  } else {
    householder_tridiagonalize(c, n, d, e);
    implicit_ql(c, n, d, e);
  }
  out.values = std::move(d);
  out.vectors.assign(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::span<double> v(out.vectors.data() + j * n, n);
    for (std::size_t i = 0; i < n; ++i) v[i] = c[i * n + j];
    backward_solve_transposed(v);
  }
  return out;
}

template void SymTridiag::multiply<double>(std::span<const double>, std::span<double>) const;
template void SymTridiag::multiply<Complex>(std::span<const Complex>, std::span<Complex>) const;
template double SymTridiag::form<double>(std::span<const double>, std::span<const double>) const;
template Complex SymTridiag::form<Complex>(std::span<const Complex>,
                                           std::span<const Complex>) const;
template struct ShiftedSystem<double>;
template struct ShiftedSystem<Complex>;
template class TridiagFactor<double>;
template class TridiagFactor<Complex>;
template std::vector<double> solve_tridiag<double>(const ShiftedSystem<double>&,
                                                   std::span<const double>);
template std::vector<Complex> solve_tridiag<Complex>(const ShiftedSystem<Complex>&,
                                                     std::span<const Complex>);
template double max_abs<double>(std::span<const double>);
template double max_abs<Complex>(std::span<const Complex>);

}  // namespace bfo::linalg
