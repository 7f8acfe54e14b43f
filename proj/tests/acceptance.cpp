// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bfo/harness.hpp"
#include "bfo/models.hpp"
#include "bfo/observers.hpp"
#include "support/oracles.hpp"

using namespace bfo;
using namespace bfo::observers;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::shared_ptr<const FemOperators> make_ops(int cells) {
  return std::make_shared<const FemOperators>(
      fem::assemble(fem::Mesh1D(1.0, cells), fem::ObservationProfile::standard()));
}

double m_norm(const FemOperators& ops, std::span<const Complex> x) {
  return std::sqrt(ops.mass.form<Complex>(x, x).real());
}

double x_norm(const FemOperators& ops, std::span<const double> p, std::span<const double> v) {
  return std::sqrt(2.0 * wave_energy(ops, p, v));
}

/// ||M^{-1} f||_M.
template <class T>
double load_norm(const FemOperators& ops, const std::vector<T>& f) {
  const linalg::ShiftedSystem<T> mass(ops.mass, ops.stiffness, ops.observation, 1.0, 0.0, 0.0);
  const auto g = linalg::solve_tridiag<T>(mass, f);
  return std::sqrt(std::abs(ops.mass.form<T>(g, g)));
}

// Criteria 1, 2 and 7 share the clean rows at 128 cells.
std::vector<harness::SweepRow> g_convergence_rows[2];

Outcome convergence(Equation eq, double budget_s) {
  auto plan = harness::SweepPlan::defaults(eq);
  plan.gates.slope_min = 0.8;
  plan.gates.slope_max = 1.15;
  plan.gates.require_monotone = true;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = harness::run_sweep(plan);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g_convergence_rows[eq == Equation::wave] = rows;
  const auto summary = harness::summarize(plan, rows);

  std::ostringstream d;
  d << "errors";
  for (const auto& r : rows) d << " " << r.n_cells << ":" << fmt(r.error_x) << "(N=" << r.n_used
                               << ",eta=" << fmt(r.eta_hat) << ")";
  bool ok = summary.passed();
  for (const auto& g : summary.gates) {
    if (g.name != "cells_ok") d << "; " << g.name << " " << (g.passed ? "ok" : "FAILED");
  }
  if (summary.fit) {
    d << "; power-log2 slope " << fmt(summary.fit->slope) << " on " << summary.fit->points
      << " levels" << (summary.fit->dropped_coarsest ? " (coarsest dropped as outlier)" : "");
    const auto pure = harness::fit_rate(rows, harness::FitModel::pure_power, plan.theta);
    d << ", pure-power " << fmt(pure.slope);
  }
  d << "; runtime " << fmt(seconds) << " s (limit " << budget_s << ")";
  if (seconds > budget_s) ok = false;
  return {ok, d.str()};
}

Outcome contraction_suite() {
  const int cells = 64;
  auto ops = make_ops(cells);
  const double tol = 1e-12;
  int violations = 0, checks = 0;
  double worst = 0.0;
  auto record = [&](double after, double before) {
    ++checks;
    const double r = before > 0 ? after / before : 0.0;
    worst = std::max(worst, r);
    if (after > before * (1 + tol)) ++violations;
  };
  {
    SchrodingerObserver s(ops, 1.0 / cells, cells);
    CVec next(ops->dofs());
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const CVec u = s.random_state(seed);
      s.plus_stepper().step(u, {}, next);
      record(m_norm(*ops, next), m_norm(*ops, u));
      s.minus_stepper().step(u, {}, next);
      record(m_norm(*ops, next), m_norm(*ops, u));
      record(s.norm(s.apply_L(u)), s.norm(u));
    }
  }
  {
    const double dt = 1.0 / cells;
    WaveObserver w(ops, dt, 2 * cells);
    RVec next(ops->dofs()), v1(ops->dofs());
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const WaveState u = w.random_state(seed);
      // (p^{k-1}, D_t p^{k-1}) = u determines p^{k-2}.
      RVec prev2(u.position);
      for (std::size_t i = 0; i < prev2.size(); ++i) prev2[i] -= dt * u.velocity[i];
      w.stepper().step(u.position, prev2, {}, next);
      for (std::size_t i = 0; i < next.size(); ++i) v1[i] = (next[i] - u.position[i]) / dt;
      record(x_norm(*ops, next, v1), x_norm(*ops, u.position, u.velocity));
      record(w.norm(w.apply_L(u)), w.norm(u));
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in " +
                               std::to_string(checks) + " checks; worst ratio " +
                               fmt(worst)};
}

Outcome duhamel_suite() {
  const int cells = 64;
  auto ops = make_ops(cells);
  const double dt = 1.0 / cells;
  const std::size_t n = ops->dofs();
  int violations = 0, checks = 0;
  double worst = 0.0;
  auto record = [&](double lhs, double rhs) {
    ++checks;
    worst = std::max(worst, lhs / rhs);
    if (lhs > rhs) ++violations;
  };
  for (std::uint64_t run = 1; run <= 20; ++run) {
    const int steps = cells;
    {
      std::vector<CVec> loads(steps + 1);
      double max_load = 0.0;
      for (int k = 1; k <= steps; ++k) {
        loads[k] = oracle::random_complex(n, 1000 * run + k);
        max_load = std::max(max_load, load_norm(*ops, loads[k]));
      }
      const CVec q0 = oracle::random_complex(n, 7 * run);
      SchrodingerStepper st(ops, dt, steps, Sign::plus);
      const auto traj = run_schrodinger(
          st, q0,
          [&](int k, std::span<Complex> f) { std::copy(loads[k].begin(), loads[k].end(), f.begin()); },
          true);
      const double n0 = m_norm(*ops, q0);
      for (int k = 0; k <= steps; ++k) {
        record(m_norm(*ops, traj.history[k]), n0 + k * dt * max_load * (1 + 10 * dt));
      }
    }
    {
      // Zero initial velocity: the start-up step p^1 = p^0 then carries no
      // energy of its own.
      std::vector<RVec> loads(steps + 1);
      double max_load = 0.0;
      for (int k = 2; k <= steps; ++k) {
        loads[k] = oracle::random_real(n, 5000 * run + k);
        max_load = std::max(max_load, load_norm(*ops, loads[k]));
      }
      const RVec p0 = oracle::random_real(n, 11 * run);
      const RVec p1(n, 0.0);
      WaveStepper st(ops, dt, steps);
      const auto traj = run_wave(
          st, p0, p1,
          [&](int k, std::span<double> f) { std::copy(loads[k].begin(), loads[k].end(), f.begin()); },
          true);
      const double n0 = x_norm(*ops, p0, p1);
      for (int k = 0; k <= steps; ++k) {
        record(x_norm(*ops, traj.positions[k], traj.velocities[k]),
               n0 + k * dt * max_load * (1 + 10 * dt));
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(checks) +
                               " checks; worst lhs/rhs " + fmt(worst)};
}

template <class System>
void neumann_tail(const System& sys, const ObservationTrace& trace, std::ostringstream& d,
                  bool& ok) {
  const double eta = estimate_eta(sys).value;
  const auto z = sys.backward(trace, sys.forward(trace));
  FixedPointResult info;
  const auto fixed = fixed_point_solve(sys, z, 1e-15, 20000, &info);
  d << to_string(System::equation) << " eta=" << fmt(eta) << (info.converged ? "" : " (fixed point unconverged)");
  ok = ok && info.converged;
  for (int N : {2, 4, 8}) {
    auto est = neumann_reconstruct(sys, trace, NeumannPolicy::fixed(N)).estimate;
    axpy(-1.0, fixed, est);
    const double dev = sys.norm(est);
    const double bound = std::pow(eta, N + 1) / (1 - eta) * sys.norm(z) * 1.01;
    d << " N=" << N << ":" << fmt(dev / bound);
    if (!(dev <= bound)) ok = false;
  }
  d << "; ";
}

Outcome neumann_tail_suite() {
  const int cells = 64;
  auto ops = make_ops(cells);
  std::ostringstream d;
  d << "deviation/bound: ";
  bool ok = true;
  {
    const auto inst = models::default_instance(Equation::schrodinger, cells);
    neumann_tail(SchrodingerObserver(ops, inst.dt, inst.steps),
                 models::generate_observation(inst, 2), d, ok);
  }
  {
    const auto inst = models::default_instance(Equation::wave, cells);
    neumann_tail(WaveObserver(ops, inst.dt, inst.steps), models::generate_observation(inst, 2), d,
                 ok);
  }
  return {ok, d.str()};
}

Outcome truncation_table() {
  struct Case {
    TruncationMode mode;
    double h, dt, theta, eta;
    int expect;
  };
  // Expected values worked out by hand from the closed-form rule.
  const Case cases[] = {
      {TruncationMode::full, 1.0 / 32, 1.0 / 32, 1.0, 0.1, 2},
      {TruncationMode::full, 1.0 / 64, 1.0 / 64, 1.0, 0.3, 3},
      {TruncationMode::full, 1.0 / 128, 1.0 / 128, 1.0, 0.5, 6},
      {TruncationMode::full, 1.0 / 256, 1.0 / 256, 1.0, 0.9, 47},
      {TruncationMode::full, 0.01, 0.01, 1.0, 0.5, 6},
      {TruncationMode::full, 0.6, 0.5, 1.0, 0.5, 0},
      {TruncationMode::semi, 1.0 / 32, 0.0, 1.0, 0.1, 2},
      {TruncationMode::semi, 1.0 / 64, 0.0, 0.5, 0.3, 2},
      {TruncationMode::semi, 0.01, 0.0, 2.0, 0.7, 26},
      {TruncationMode::full, 0.02, 0.01, 0.5, 0.2, 2},
  };
  int bad = 0;
  std::ostringstream d;
  for (const auto& c : cases) {
    const int got = choose_truncation(c.mode, c.h, c.dt, c.theta, c.eta);
    if (got != c.expect) {
      ++bad;
      d << " got " << got << " want " << c.expect << ";";
    }
  }
  return {bad == 0, std::to_string(10 - bad) + "/10 cases match" + d.str()};
}

Outcome noise_robustness() {
  bool ok = true;
  std::ostringstream d;
  for (Equation eq : {Equation::schrodinger, Equation::wave}) {
    auto plan = harness::SweepPlan::defaults(eq);
    plan.base_cells = 128;
    plan.levels = 1;
    plan.noise_eps = {0.0, 1e-3, 1e-2};
    const auto study = harness::noise_study(plan);
    double r3 = NAN, r2 = NAN, clean = NAN;
    for (const auto& e : study.entries) {
      if (e.eps == 1e-3) r3 = e.ratio;
      if (e.eps == 1e-2) r2 = e.ratio;
      if (e.eps == 0.0) clean = e.error;
    }
    double reference = NAN;
    for (const auto& r : g_convergence_rows[eq == Equation::wave]) {
      if (r.n_cells == 128) reference = r.error_x;
    }
    const double spread = std::max(r3 / r2, r2 / r3);
    const bool stable = std::isfinite(spread) && spread <= 3.0;
    const bool exact = clean == reference;
    ok = ok && stable && exact;
    d << to_string(eq) << " ratio(1e-3)=" << fmt(r3) << " ratio(1e-2)=" << fmt(r2)
      << " spread " << fmt(spread) << (exact ? ", eps=0 bit-exact" : ", eps=0 differs from sweep")
      << "; ";
  }
  return {ok, d.str()};
}

Outcome oracle_agreement() {
  auto ops = make_ops(8);
  const std::size_t n = ops->dofs();
  const auto eig = linalg::pencil_eigs(ops->stiffness, ops->mass);
  // Semi-discrete system in the M-orthonormal pencil basis: a' = (i Lambda - V^T B V) a.
  oracle::Dense V(n), G(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto v = eig.vector(j);
    for (std::size_t i = 0; i < n; ++i) V(i, j) = v[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    const auto vj = eig.vector(j);
    const RVec Bv = ops->observation.multiply<double>(vj);
    for (std::size_t i = 0; i < n; ++i) {
      const auto vi = eig.vector(i);
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += vi[r] * Bv[r];
      G(i, j) = -s;
    }
    G(j, j) += Complex(0.0, eig.values[j]);
  }
  // Lowest-mode data: the only component with lambda dt well below 1 at
  // dt = 1e-2 on this mesh, so the first-order regime is visible.
  const RVec nodal = fem::interpolate(ops->mesh, fem::FieldSpec::sine_sum({1.0}));
  const CVec q0(nodal.begin(), nodal.end());
  const CVec Mq0 = ops->mass.multiply<Complex>(q0);
  CVec a0(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) a0[j] += V(i, j) * Mq0[i];
  }
  const double T = 0.5;
  const CVec exact = V * (oracle::expm(Complex(T) * G) * a0);

  std::vector<double> errs;
  std::ostringstream d;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    const int steps = static_cast<int>(std::lround(T / dt));
    SchrodingerStepper st(ops, dt, steps, Sign::plus);
    CVec diff = run_schrodinger(st, q0).final_state;
    for (std::size_t i = 0; i < n; ++i) diff[i] -= exact[i];
    errs.push_back(m_norm(*ops, diff));
    d << "dt=" << dt << " err=" << fmt(errs.back()) << "; ";
  }
  const double o1 = std::log2(errs[0] / errs[1]);
  const double o2 = std::log2(errs[1] / errs[2]);
  d << "orders " << fmt(o1) << ", " << fmt(o2);
  const bool ok = o1 >= 0.8 && o1 <= 1.2 && o2 >= 0.8 && o2 <= 1.2;
  return {ok, d.str()};
}

Outcome self_adjointness() {
  const int cells = 64;
  auto ops = make_ops(cells);
  SchrodingerObserver s(ops, 1.0 / cells, cells);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const CVec u = s.random_state(seed);
    const CVec v = s.random_state(seed + 10000);
    const Complex defect = s.inner(s.apply_L(u), v) - s.inner(u, s.apply_L(v));
    worst = std::max(worst, std::abs(defect) / (s.norm(u) * s.norm(v)));
  }
  // Smooth states (first three sine modes); nodal-random states are
  // dominated by mesh modes the scheme damps out and are reported alongside.
  auto wave_defect = [&](int steps, bool smooth) {
    WaveObserver w(ops, 2.0 / steps, steps);
    double m = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      auto state = [&](std::uint64_t sd) {
        if (!smooth) return w.random_state(sd);
        return WaveState{oracle::random_smooth(ops->mesh, 3, sd),
                         oracle::random_smooth(ops->mesh, 3, sd + 500)};
      };
      const WaveState u = state(seed);
      const WaveState v = state(seed + 10000);
      m = std::max(m, std::abs(w.inner(w.apply_L(u), v) - w.inner(u, w.apply_L(v))) /
                          (w.norm(u) * w.norm(v)));
    }
    return m;
  };
  const double d1 = wave_defect(2 * cells, true);
  const double d2 = wave_defect(4 * cells, true);
  const double shrink = d1 / d2;
  const double r1 = wave_defect(2 * cells, false);
  const double r2 = wave_defect(4 * cells, false);
  const bool ok = worst <= 1e-10 && shrink >= 1.8;
  return {ok, "schrodinger defect " + fmt(worst) + "; wave defect (smooth states) " + fmt(d1) +
                  " -> " + fmt(d2) + " (shrink " + fmt(shrink) + "x); nodal-random states " +
                  fmt(r1) + " -> " + fmt(r2)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"1 schrodinger-convergence", [] { return convergence(Equation::schrodinger, 300.0); }},
      {"2 wave-convergence", [] { return convergence(Equation::wave, 600.0); }},
      {"3 contraction", contraction_suite},
      {"4 duhamel", duhamel_suite},
      {"5 neumann-tail", neumann_tail_suite},
      {"6 truncation-rule", truncation_table},
      {"7 noise-robustness", noise_robustness},
      {"8 oracle-agreement", oracle_agreement},
      {"9 self-adjointness", self_adjointness},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failed;
    std::printf("%s criterion %s: %s\n", o.passed ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
