#include <cmath>

#include "bfo/errors.hpp"
#include "bfo/fem.hpp"
#include "bfo/linalg.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace bfo;
using linalg::Complex;
using linalg::CVec;
using linalg::RVec;
using linalg::ShiftedSystem;
using linalg::SymTridiag;

namespace {

SymTridiag random_spd(std::size_t n, std::uint64_t seed) {
  RVec off = oracle::random_real(n - 1, seed, -1.0, 1.0);
  RVec diag = oracle::random_real(n, seed + 1, 2.5, 4.0);
  return SymTridiag(diag, off);
}

template <class T>
double residual_max(const ShiftedSystem<T>& sys, std::span<const T> x, std::span<const T> rhs) {
  std::vector<T> ax(x.size());
  sys.multiply(x, ax);
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r = std::max(r, std::abs(ax[i] - rhs[i]));
  return r;
}

}  // namespace

TEST_CASE("identity solve returns the right-hand side") {
  const auto I = SymTridiag::identity(5);
  const auto Z = SymTridiag::zeros(5);
  ShiftedSystem<double> sys(I, Z, Z, 1.0, 0.0, 0.0);
  RVec e1(5, 0.0);
  e1[0] = 1.0;
  const RVec x = linalg::solve_tridiag<double>(sys, e1);
  for (std::size_t i = 0; i < 5; ++i) CHECK(x[i] == e1[i]);
}

TEST_CASE("2x2 real shifted system agrees with Cramer's rule") {
  const SymTridiag M({4.0, 3.0}, {1.0});
  const SymTridiag K({2.0, 5.0}, {-1.0});
  const SymTridiag B({0.5, 0.25}, {0.125});
  const double alpha = 1.5, beta = 0.75, gamma = 2.0;
  ShiftedSystem<double> sys(M, K, B, alpha, beta, gamma);
  const double a = alpha * 4 + beta * 2 + gamma * 0.5;
  const double b = alpha * 1 + beta * -1 + gamma * 0.125;
  const double d = alpha * 3 + beta * 5 + gamma * 0.25;
  const auto expect = oracle::cramer2(a, b, b, d, 1.0, -2.0);
  const RVec x = linalg::solve_tridiag<double>(sys, RVec{1.0, -2.0});
  CHECK(x[0] == doctest::Approx(expect[0]).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(expect[1]).epsilon(1e-14));
}

TEST_CASE("random shifted systems solve to residual 1e-12") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const std::size_t n = 3 + seed * 7;
    const auto M = random_spd(n, seed);
    const auto K = random_spd(n, seed + 100);
    const auto B = random_spd(n, seed + 200);
    const double dt = 0.01 * seed;
    {
      ShiftedSystem<Complex> sys(M, K, B, 1.0, Complex(0.0, -dt), dt);
      const CVec rhs = oracle::random_complex(n, seed + 300);
      const CVec x = linalg::solve_tridiag<Complex>(sys, rhs);
      const double scale = linalg::max_abs<Complex>(rhs) + linalg::max_abs<Complex>(x);
      CHECK(residual_max<Complex>(sys, x, rhs) <= 1e-12 * scale);
    }
    {
      ShiftedSystem<double> sys(M, K, B, 1.0, dt * dt, dt);
      const RVec rhs = oracle::random_real(n, seed + 400);
      const RVec x = linalg::solve_tridiag<double>(sys, rhs);
      const double scale = linalg::max_abs<double>(rhs) + linalg::max_abs<double>(x);
      CHECK(residual_max<double>(sys, x, rhs) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("conjugation symmetry of the skew-shifted solve") {
  const auto M = random_spd(30, 7);
  const auto K = random_spd(30, 8);
  const auto B = random_spd(30, 9);
  const double dt = 0.05;
  ShiftedSystem<Complex> minus(M, K, B, 1.0, Complex(0.0, -dt), dt);
  ShiftedSystem<Complex> plus(M, K, B, 1.0, Complex(0.0, dt), dt);
  const CVec rhs = oracle::random_complex(30, 10);
  CVec rhs_conj(rhs.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs_conj[i] = std::conj(rhs[i]);
  const CVec a = linalg::solve_tridiag<Complex>(plus, rhs_conj);
  const CVec b = linalg::solve_tridiag<Complex>(minus, rhs);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - std::conj(b[i])) <= 1e-14 * (1.0 + std::abs(b[i])));
  }
}

TEST_CASE("solver errors") {
  const auto I = SymTridiag::identity(4);
  const auto Z = SymTridiag::zeros(4);
  SUBCASE("dimension mismatch") {
    ShiftedSystem<double> sys(I, Z, Z, 1.0, 0.0, 0.0);
    CHECK_THROWS_AS(linalg::solve_tridiag<double>(sys, RVec(3, 1.0)), DimensionMismatch);
    const auto I3 = SymTridiag::identity(3);
    CHECK_THROWS_AS(ShiftedSystem<double>(I, I3, Z, 1.0, 0.0, 0.0), DimensionMismatch);
  }
  SUBCASE("singular pivot reports its index") {
    // The trailing block [[1, 1], [1, 1]] is singular: pivot 2 vanishes.
    try {
      linalg::TridiagFactor<double> tf(RVec{1.0, 1.0, 1.0}, RVec{0.0, 1.0});
      FAIL("expected SingularPivot");
    } catch (const SingularPivot& e) {
      CHECK(e.index() == 2);
    }
  }
  SUBCASE("zero matrix") {
    ShiftedSystem<double> sys(I, Z, Z, 0.0, 0.0, 0.0);
    CHECK_THROWS_AS(linalg::solve_tridiag<double>(sys, RVec(4, 1.0)), SingularPivot);
  }
}

TEST_CASE("pencil_eigs: identical pencil has unit spectrum") {
  const auto A = random_spd(12, 3);
  const auto eig = linalg::pencil_eigs(A, A);
  for (double v : eig.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pencil_eigs: uniform P1 pencil matches the closed form") {
  for (int cells : {4, 9, 32, 100}) {
    const fem::Mesh1D mesh(1.0, cells);
    const auto ops = fem::assemble(mesh, fem::ObservationProfile::constant(0.0));
    const auto eig = linalg::pencil_eigs(ops.stiffness, ops.mass);
    REQUIRE(eig.values.size() == mesh.dofs());
    for (std::size_t k = 0; k < eig.values.size(); ++k) {
      const double expect = oracle::p1_eigenvalue(static_cast<int>(k) + 1, mesh.h());
      CHECK(eig.values[k] == doctest::Approx(expect).epsilon(1e-10));
    }
  }
  const fem::Mesh1D quarter(1.0, 4);
  const auto ops = fem::assemble(quarter, fem::ObservationProfile::constant(0.0));
  const auto eig = linalg::pencil_eigs(ops.stiffness, ops.mass);
  CHECK(eig.values[0] == doctest::Approx(10.3866).epsilon(1e-5));
}

TEST_CASE("pencil_eigs: M-orthonormal eigenvectors, residual, ordering") {
  const fem::Mesh1D mesh(1.0, 64);
  const auto ops = fem::assemble(mesh, fem::ObservationProfile::standard());
  const auto eig = linalg::pencil_eigs(ops.stiffness, ops.mass);
  const std::size_t n = eig.n;
  for (std::size_t i = 0; i + 1 < n; ++i) CHECK(eig.values[i] < eig.values[i + 1]);
  CHECK(eig.values[0] > 0.0);
  double worst_orth = 0.0, worst_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto vi = eig.vector(i);
    const RVec Kv = ops.stiffness.multiply<double>(vi);
    const RVec Mv = ops.mass.multiply<double>(vi);
    double res = 0.0, scale = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      res = std::max(res, std::abs(Kv[r] - eig.values[i] * Mv[r]));
      scale = std::max(scale, std::abs(Kv[r]));
    }
    worst_res = std::max(worst_res, res / scale);
    for (std::size_t j = 0; j < n; ++j) {
      const auto vj = eig.vector(j);
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) dot += vj[r] * Mv[r];
      worst_orth = std::max(worst_orth, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  }
  CHECK(worst_orth <= 1e-10);
  CHECK(worst_res <= 1e-8);
}

TEST_CASE("pencil_eigs errors") {
  const SymTridiag K({2.0, 2.0}, {-1.0});
  const SymTridiag bad({1.0, -1.0}, {0.0});
  CHECK_THROWS_AS(linalg::pencil_eigs(K, bad), ConvergenceFailure);
  const auto big = SymTridiag::identity(linalg::kPencilMaxSize + 1);
  CHECK_THROWS_AS(linalg::pencil_eigs(big, big), DimensionMismatch);
  CHECK_THROWS_AS(linalg::pencil_eigs(K, SymTridiag::identity(3)), DimensionMismatch);
}

TEST_CASE("single-entry pencil") {
  const SymTridiag K({6.0}, {});
  const SymTridiag M({2.0}, {});
  const auto eig = linalg::pencil_eigs(K, M);
  CHECK(eig.values[0] == doctest::Approx(3.0));
  CHECK(eig.vector(0)[0] * eig.vector(0)[0] * 2.0 == doctest::Approx(1.0));
}
