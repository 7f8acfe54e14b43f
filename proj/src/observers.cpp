#include "bfo/observers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "bfo/errors.hpp"

namespace bfo::observers {

namespace {

double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

linalg::TridiagFactor<Complex> schrodinger_factor(const FemOperators& ops, double dt, Sign sign) {
  const Complex skew = sign == Sign::plus ? Complex(0.0, -dt) : Complex(0.0, dt);
  return linalg::TridiagFactor<Complex>(linalg::ShiftedSystem<Complex>(
      ops.mass, ops.stiffness, ops.observation, Complex(1.0), skew, Complex(dt)));
}

linalg::TridiagFactor<double> wave_factor(const FemOperators& ops, double dt) {
  return linalg::TridiagFactor<double>(linalg::ShiftedSystem<double>(
      ops.mass, ops.stiffness, ops.observation, 1.0, dt * dt, dt));
}

void check_time_grid(double dt, int steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (steps < 1) throw std::invalid_argument("number of steps must be at least 1");
}

}  // namespace

std::string to_string(Equation eq) {
  return eq == Equation::schrodinger ? "schrodinger" : "wave";
}

Equation parse_equation(std::string_view name) {
  if (name == "schrodinger") return Equation::schrodinger;
  if (name == "wave") return Equation::wave;
  throw std::invalid_argument("unknown equation '" + std::string(name) +
                              "' (expected schrodinger or wave)");
}

std::string to_string(EtaEstimate::Kind kind) {
  return kind == EtaEstimate::Kind::operator_norm ? "operator_norm" : "dominant_ratio";
}

// ---------------------------------------------------------------------------

SchrodingerStepper::SchrodingerStepper(std::shared_ptr<const FemOperators> ops, double dt,
                                       int steps, Sign sign)
    : ops_((check_time_grid(dt, steps), std::move(ops))),
      dt_(dt),
      steps_(steps),
      sign_(sign),
      factor_(schrodinger_factor(*ops_, dt, sign)) {}

void SchrodingerStepper::step(std::span<const Complex> prev, std::span<const Complex> load,
                              std::span<Complex> next) const {
  ops_->mass.multiply<Complex>(prev, next);
  if (!load.empty()) {
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += dt_ * load[i];
  }
  factor_.solve_in_place(next);
}

SchrodingerTrajectory run_schrodinger(const SchrodingerStepper& stepper,
                                      std::span<const Complex> q0,
                                      const ComplexForcing& forcing, bool keep_history) {
  const std::size_t n = stepper.ops().dofs();
  if (q0.size() != n) {
    throw DimensionMismatch("run_schrodinger: initial state has " + std::to_string(q0.size()) +
                            " entries, expected " + std::to_string(n));
  }
  SchrodingerTrajectory out;
  CVec current(q0.begin(), q0.end());
  CVec next(n);
  CVec load;
  if (forcing) load.assign(n, Complex{});
  if (keep_history) {
    out.history.reserve(stepper.steps() + 1);
    out.history.push_back(current);
  }
  for (int k = 1; k <= stepper.steps(); ++k) {
    if (forcing) {
      std::fill(load.begin(), load.end(), Complex{});
      forcing(k, load);
    }
    stepper.step(current, load, next);
    std::swap(current, next);
    if (keep_history) out.history.push_back(current);
  }
  out.final_state = std::move(current);
  return out;
}

// ---------------------------------------------------------------------------

WaveStepper::WaveStepper(std::shared_ptr<const FemOperators> ops, double dt, int steps)
    : ops_((check_time_grid(dt, steps), std::move(ops))),
      dt_(dt),
      steps_(steps),
      factor_(wave_factor(*ops_, dt)) {}

void WaveStepper::step(std::span<const double> prev, std::span<const double> prev2,
                       std::span<const double> load, std::span<double> next) const {
  const std::size_t n = next.size();
  const auto& m = ops_->mass;
  const auto& b = ops_->observation;
  // rhs = M (2 p^{k-1} - p^{k-2}) + dt B p^{k-1} + dt^2 f^k
  RVec combo(n), bp(n);
  for (std::size_t i = 0; i < n; ++i) combo[i] = 2.0 * prev[i] - prev2[i];
  m.multiply<double>(combo, next);
  b.multiply<double>(prev, bp);
  for (std::size_t i = 0; i < n; ++i) next[i] += dt_ * bp[i];
  if (!load.empty()) {
    for (std::size_t i = 0; i < n; ++i) next[i] += dt_ * dt_ * load[i];
  }
  factor_.solve_in_place(next);
}

WaveTrajectory run_wave(const WaveStepper& stepper, std::span<const double> p0,
                        std::span<const double> p1, const RealForcing& forcing,
                        bool keep_history) {
  const std::size_t n = stepper.ops().dofs();
  if (p0.size() != n || p1.size() != n) {
    throw DimensionMismatch("run_wave: initial data size mismatch (expected " +
                            std::to_string(n) + ")");
  }
  const double dt = stepper.dt();
  WaveTrajectory out;
  RVec older(p0.begin(), p0.end());
  RVec current(n);
  for (std::size_t i = 0; i < n; ++i) current[i] = p0[i] + dt * p1[i];
  if (keep_history) {
    out.positions.reserve(stepper.steps() + 1);
    out.velocities.reserve(stepper.steps() + 1);
    out.positions.push_back(older);
    out.velocities.emplace_back(p1.begin(), p1.end());
    out.positions.push_back(current);
    out.velocities.emplace_back(p1.begin(), p1.end());
  }
  RVec next(n);
  RVec load;
  if (forcing) load.assign(n, 0.0);
  for (int k = 2; k <= stepper.steps(); ++k) {
    if (forcing) {
      std::fill(load.begin(), load.end(), 0.0);
      forcing(k, load);
    }
    stepper.step(current, older, load, next);
    std::swap(older, current);
    std::swap(current, next);
    if (keep_history) {
      out.positions.push_back(current);
      RVec v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = (current[i] - older[i]) / dt;
      out.velocities.push_back(std::move(v));
    }
  }
  out.final_velocity.resize(n);
  if (stepper.steps() == 1) {
    out.final_velocity.assign(p1.begin(), p1.end());
  } else {
    for (std::size_t i = 0; i < n; ++i) out.final_velocity[i] = (current[i] - older[i]) / dt;
  }
  out.final_position = std::move(current);
  return out;
}

double wave_energy(const FemOperators& ops, std::span<const double> position,
                   std::span<const double> velocity) {
  return 0.5 * (ops.mass.form<double>(velocity, velocity) +
                ops.stiffness.form<double>(position, position));
}

// ---------------------------------------------------------------------------

std::size_t ObservationTrace::sample_size() const noexcept {
  if (header.equation == Equation::schrodinger) {
    return complex_samples.empty() ? 0 : complex_samples.front().size();
  }
  return real_samples.empty() ? 0 : real_samples.front().size();
}

ObservationTrace zero_trace(Equation eq, const FemOperators& ops, double dt, int steps) {
  ObservationTrace t;
  t.header.equation = eq;
  t.header.length = ops.mesh.length;
  t.header.n_cells = ops.mesh.n_cells;
  t.header.dt = dt;
  t.header.steps = steps;
  t.header.tau = dt * steps;
  t.header.profile = ops.profile;
  const std::size_t n = ops.dofs();
  if (eq == Equation::schrodinger) {
    t.complex_samples.assign(steps + 1, CVec(n));
  } else {
    t.real_samples.assign(steps + 1, RVec(n, 0.0));
  }
  return t;
}

void scale_in_place(RVec& x, double a) {
  for (auto& v : x) v *= a;
}
void scale_in_place(CVec& x, double a) {
  for (auto& v : x) v *= a;
}
void scale_in_place(WaveState& x, double a) {
  scale_in_place(x.position, a);
  scale_in_place(x.velocity, a);
}
void axpy(double a, const RVec& x, RVec& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}
void axpy(double a, const CVec& x, CVec& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}
void axpy(double a, const WaveState& x, WaveState& y) {
  axpy(a, x.position, y.position);
  axpy(a, x.velocity, y.velocity);
}

namespace {

void check_trace_common(const ObservationTrace& trace, Equation eq, const FemOperators& ops,
                        double dt, int steps) {
  std::ostringstream os;
  if (trace.header.equation != eq) {
    os << "trace equation " << to_string(trace.header.equation) << " does not match observer "
       << to_string(eq);
  } else if (trace.sample_count() != static_cast<std::size_t>(steps) + 1) {
    os << "trace has " << trace.sample_count() << " samples, observer needs " << steps + 1;
  } else if (trace.sample_size() != ops.dofs()) {
    os << "trace samples have " << trace.sample_size() << " nodes, mesh has " << ops.dofs();
  } else if (std::abs(trace.header.dt - dt) > 1e-12 * dt) {
    os << "trace dt " << trace.header.dt << " does not match observer dt " << dt;
  } else {
    return;
  }
  throw std::invalid_argument("trace/mesh mismatch: " + os.str());
}

}  // namespace

// ---------------------------------------------------------------------------

SchrodingerObserver::SchrodingerObserver(std::shared_ptr<const FemOperators> ops, double dt,
                                         int steps)
    : ops_(ops), damped_(ops, dt, steps, Sign::plus), reversed_(ops, dt, steps, Sign::minus) {}

void SchrodingerObserver::check_trace(const ObservationTrace& trace) const {
  check_trace_common(trace, equation, ops(), dt(), steps());
}

SchrodingerObserver::State SchrodingerObserver::forward(const ObservationTrace& trace) const {
  check_trace(trace);
  const auto& w = ops().observation_weight;
  const ComplexForcing forcing = [&](int k, std::span<Complex> load) {
    w.multiply<Complex>(trace.complex_samples[k], load);
  };
  return run_schrodinger(damped_, zero(), forcing).final_state;
}

SchrodingerObserver::State SchrodingerObserver::backward(const ObservationTrace& trace,
                                                         const State& final_data) const {
  check_trace(trace);
  const auto& w = ops().observation_weight;
  const int K = steps();
  const ComplexForcing forcing = [&](int k, std::span<Complex> load) {
    w.multiply<Complex>(trace.complex_samples[K - k], load);
  };
  return run_schrodinger(reversed_, final_data, forcing).final_state;
}

SchrodingerObserver::State SchrodingerObserver::apply_L(const State& x) const {
  const CVec mid = run_schrodinger(damped_, x).final_state;
  return run_schrodinger(reversed_, mid).final_state;
}

double SchrodingerObserver::norm(const State& x) const {
  return std::sqrt(std::abs(ops().mass.form<Complex>(x, x)));
}

Complex SchrodingerObserver::inner(const State& x, const State& y) const {
  return ops().mass.form<Complex>(y, x);
}

SchrodingerObserver::State SchrodingerObserver::random_state(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  State s(ops().dofs());
  for (auto& v : s) {
    const double re = uniform_pm1(rng);
    const double im = uniform_pm1(rng);
    v = Complex(re, im);
  }
  return s;
}

// ---------------------------------------------------------------------------

WaveObserver::WaveObserver(std::shared_ptr<const FemOperators> ops, double dt, int steps)
    : ops_(ops), stepper_(ops, dt, steps) {}

void WaveObserver::check_trace(const ObservationTrace& trace) const {
  check_trace_common(trace, equation, ops(), dt(), steps());
}

WaveObserver::State WaveObserver::forward(const ObservationTrace& trace) const {
  check_trace(trace);
  const auto& w = ops().observation_weight;
  const RealForcing forcing = [&](int k, std::span<double> load) {
    w.multiply<double>(trace.real_samples[k], load);
  };
  const State z = zero();
  WaveTrajectory traj = run_wave(stepper_, z.position, z.velocity, forcing);
  return {std::move(traj.final_position), std::move(traj.final_velocity)};
}

WaveObserver::State WaveObserver::backward(const ObservationTrace& trace,
                                           const State& final_data) const {
  check_trace(trace);
  const auto& w = ops().observation_weight;
  const int K = steps();
  const RealForcing forcing = [&](int k, std::span<double> load) {
    w.multiply<double>(trace.real_samples[K - k], load);
    for (auto& v : load) v = -v;
  };
  RVec flipped = final_data.velocity;
  scale_in_place(flipped, -1.0);
  WaveTrajectory traj = run_wave(stepper_, final_data.position, flipped, forcing);
  scale_in_place(traj.final_velocity, -1.0);
  return {std::move(traj.final_position), std::move(traj.final_velocity)};
}

WaveObserver::State WaveObserver::apply_L(const State& x) const {
  WaveTrajectory fwd = run_wave(stepper_, x.position, x.velocity);
  scale_in_place(fwd.final_velocity, -1.0);
  WaveTrajectory bwd = run_wave(stepper_, fwd.final_position, fwd.final_velocity);
  scale_in_place(bwd.final_velocity, -1.0);
  return {std::move(bwd.final_position), std::move(bwd.final_velocity)};
}

double WaveObserver::norm(const State& x) const { return std::sqrt(std::max(0.0, inner(x, x))); }

double WaveObserver::inner(const State& x, const State& y) const {
  return ops().stiffness.form<double>(y.position, x.position) +
         ops().mass.form<double>(y.velocity, x.velocity);
}

WaveObserver::State WaveObserver::random_state(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  State s = zero();
  for (auto& v : s.position) v = uniform_pm1(rng);
  for (auto& v : s.velocity) v = uniform_pm1(rng);
  return s;
}

// ---------------------------------------------------------------------------

int choose_truncation(TruncationMode mode, double h, double dt, double theta, double eta) {
  if (!(h > 0.0)) throw std::invalid_argument("choose_truncation: h must be positive");
  if (mode == TruncationMode::full && !(dt > 0.0)) {
    throw std::invalid_argument("choose_truncation: dt must be positive");
  }
  if (!(eta < 1.0)) throw NotContractive(eta);
  if (!(eta > 0.0)) throw std::invalid_argument("choose_truncation: eta must be positive");
  const double numerator = mode == TruncationMode::semi ? theta * std::log(h)
                                                        : std::log(std::pow(h, theta) + dt);
  const double n = std::ceil(numerator / std::log(eta));
  return n > 0.0 ? static_cast<int>(n) : 0;
}

int resolve_truncation(const NeumannPolicy& policy, double h, double dt,
                       std::vector<std::string>& warnings) {
  if (!policy.automatic) {
    if (policy.fixed_terms < 0) throw std::invalid_argument("Neumann terms must be >= 0");
    return policy.fixed_terms;
  }
  if (std::isnan(policy.eta_hat)) {
    throw std::invalid_argument("automatic truncation needs an eta estimate");
  }
  const int raw = choose_truncation(TruncationMode::full, h, dt, policy.theta, policy.eta_hat);
  if (raw < kAutoTruncationMin) {
    warnings.push_back("truncation N = " + std::to_string(raw) + " raised to " +
                       std::to_string(kAutoTruncationMin));
    return kAutoTruncationMin;
  }
  if (raw > kAutoTruncationMax) {
    warnings.push_back("truncation N = " + std::to_string(raw) + " capped at " +
                       std::to_string(kAutoTruncationMax));
    return kAutoTruncationMax;
  }
  return raw;
}

}  // namespace bfo::observers
