#pragma once

#include <cmath>
#include <complex>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bfo/fem.hpp"
#include "bfo/linalg.hpp"

namespace bfo::observers {

using fem::FemOperators;
using linalg::Complex;
using linalg::CVec;
using linalg::RVec;

enum class Equation { schrodinger, wave };

std::string to_string(Equation eq);
Equation parse_equation(std::string_view name);

/// Sign of the skew part of the generator: plus is iA_0 - C*C, minus is
/// -iA_0 - C*C. Both are dissipative.
enum class Sign { plus, minus };

/// Fills the load vector f^k for step k (1..K). An empty function means no
/// forcing.
using ComplexForcing = std::function<void(int step, std::span<Complex> load)>;
using RealForcing = std::function<void(int step, std::span<double> load)>;

/// Implicit Euler stepper for  <D_t q^k, phi> = +-i <q^k, phi>_{1/2}
/// - <C*C q^k, phi> + <F^k, phi>,  i.e.
///   (M -+ i dt K + dt B) q^k = M q^{k-1} + dt f^k.
/// The system matrix is strictly diagonally dominant for every dt > 0, so the
/// unpivoted factorization is computed once and reused.
class SchrodingerStepper {
 public:
  SchrodingerStepper(std::shared_ptr<const FemOperators> ops, double dt, int steps, Sign sign);

  const FemOperators& ops() const noexcept { return *ops_; }
  double dt() const noexcept { return dt_; }
  int steps() const noexcept { return steps_; }
  double tau() const noexcept { return dt_ * steps_; }
  Sign sign() const noexcept { return sign_; }

  /// One step: next = (M -+ i dt K + dt B)^{-1} (M prev + dt load).
  void step(std::span<const Complex> prev, std::span<const Complex> load,
            std::span<Complex> next) const;

 private:
  std::shared_ptr<const FemOperators> ops_;
  double dt_;
  int steps_;
  Sign sign_;
  linalg::TridiagFactor<Complex> factor_;
};

struct SchrodingerTrajectory {
  CVec final_state;
  std::vector<CVec> history;  ///< q^0..q^K when requested, else empty
};

SchrodingerTrajectory run_schrodinger(const SchrodingerStepper& stepper,
                                      std::span<const Complex> q0,
                                      const ComplexForcing& forcing = {},
                                      bool keep_history = false);

/// Two-step scheme  <D_tt p^k, phi> + <p^k, phi>_{1/2} + <C0*C0 D_t p^k, phi>
/// = <f^k, phi>, k >= 2, started by p^1 = p^0 + dt p_1:
///   (M + dt^2 K + dt B) p^k = (2M + dt B) p^{k-1} - M p^{k-2} + dt^2 f^k.
class WaveStepper {
 public:
  WaveStepper(std::shared_ptr<const FemOperators> ops, double dt, int steps);

  const FemOperators& ops() const noexcept { return *ops_; }
  double dt() const noexcept { return dt_; }
  int steps() const noexcept { return steps_; }
  double tau() const noexcept { return dt_ * steps_; }

  void step(std::span<const double> prev, std::span<const double> prev2,
            std::span<const double> load, std::span<double> next) const;

 private:
  std::shared_ptr<const FemOperators> ops_;
  double dt_;
  int steps_;
  linalg::TridiagFactor<double> factor_;
};

struct WaveTrajectory {
  RVec final_position;             ///< p^K
  RVec final_velocity;             ///< D_t p^K
  std::vector<RVec> positions;     ///< p^0..p^K when requested
  std::vector<RVec> velocities;    ///< [p_1, D_t p^1, ..., D_t p^K] when requested
};

WaveTrajectory run_wave(const WaveStepper& stepper, std::span<const double> p0,
                        std::span<const double> p1, const RealForcing& forcing = {},
                        bool keep_history = false);

/// Discrete wave energy 1/2 (||v||_0^2 + ||p||_{1/2}^2).
double wave_energy(const FemOperators& ops, std::span<const double> position,
                   std::span<const double> velocity);

// ---------------------------------------------------------------------------
// Observation traces.

struct TraceHeader {
  static constexpr int kFormatVersion = 1;

  Equation equation = Equation::schrodinger;
  double length = 1.0;
  int n_cells = 2;
  double tau = 1.0;
  double dt = 1.0;
  int steps = 1;
  fem::ObservationProfile profile = fem::ObservationProfile::standard();
  int refine = 1;
  double noise_eps = 0.0;
  std::uint64_t noise_seed = 0;
  std::string provenance = "clean";  ///< clean | noisy | mesh-refined
  int format_version = kFormatVersion;
};

/// Samples y^l, l = 0..K, as nodal coefficient vectors on the reconstruction
/// mesh: c z(t_l) for Schrodinger (complex), c w'(t_l) for the wave (real).
struct ObservationTrace {
  TraceHeader header;
  std::vector<CVec> complex_samples;
  std::vector<RVec> real_samples;

  std::size_t sample_count() const noexcept {
    return header.equation == Equation::schrodinger ? complex_samples.size()
                                                    : real_samples.size();
  }
  std::size_t sample_size() const noexcept;
};

/// All-zero trace matching the given geometry.
ObservationTrace zero_trace(Equation eq, const FemOperators& ops, double dt, int steps);

// ---------------------------------------------------------------------------
// Back-and-forth systems.

struct WaveState {
  RVec position;
  RVec velocity;
};

void scale_in_place(RVec& x, double a);
void scale_in_place(CVec& x, double a);
void scale_in_place(WaveState& x, double a);
void axpy(double a, const RVec& x, RVec& y);
void axpy(double a, const CVec& x, CVec& y);
void axpy(double a, const WaveState& x, WaveState& y);

/// Forward/backward observers and L = T^- T^+ for the Schrodinger system.
/// X inner product: <u, v> = v^H M u.
class SchrodingerObserver {
 public:
  using State = CVec;
  static constexpr Equation equation = Equation::schrodinger;

  SchrodingerObserver(std::shared_ptr<const FemOperators> ops, double dt, int steps);

  const FemOperators& ops() const noexcept { return damped_.ops(); }
  std::shared_ptr<const FemOperators> shared_ops() const noexcept { return ops_; }
  double dt() const noexcept { return damped_.dt(); }
  int steps() const noexcept { return damped_.steps(); }
  double tau() const noexcept { return damped_.tau(); }
  const SchrodingerStepper& plus_stepper() const noexcept { return damped_; }
  const SchrodingerStepper& minus_stepper() const noexcept { return reversed_; }

  /// (z_h^+)^K: plus stepper from zero with forcing W y^k.
  State forward(const ObservationTrace& trace) const;
  /// (z_h^-)^0: minus stepper from `final_data` with forcing W y^{K-k}.
  State backward(const ObservationTrace& trace, const State& final_data) const;
  /// T^- T^+ with zero forcing.
  State apply_L(const State& x) const;

  double norm(const State& x) const;
  Complex inner(const State& x, const State& y) const;  ///< y^H M x
  State zero() const { return State(ops().dofs()); }
  State random_state(std::uint64_t seed) const;

 private:
  void check_trace(const ObservationTrace& trace) const;

  std::shared_ptr<const FemOperators> ops_;
  SchrodingerStepper damped_;
  SchrodingerStepper reversed_;
};

/// Forward/backward observers and L for the wave system in first-order form.
/// X inner product: <(p, v), (q, w)> = q^T K p + w^T M v.
///
/// The backward semigroup is realized as velocity flip, damped forward
/// evolution, velocity flip; the backward observer returns
/// [(w_h^-)^0; D_t (w_h^-)^1].
class WaveObserver {
 public:
  using State = WaveState;
  static constexpr Equation equation = Equation::wave;

  WaveObserver(std::shared_ptr<const FemOperators> ops, double dt, int steps);

  const FemOperators& ops() const noexcept { return stepper_.ops(); }
  std::shared_ptr<const FemOperators> shared_ops() const noexcept { return ops_; }
  double dt() const noexcept { return stepper_.dt(); }
  int steps() const noexcept { return stepper_.steps(); }
  double tau() const noexcept { return stepper_.tau(); }
  const WaveStepper& stepper() const noexcept { return stepper_; }

  /// [(w_h^+)^K; D_t (w_h^+)^K] from zero data with forcing W y^k.
  State forward(const ObservationTrace& trace) const;
  State backward(const ObservationTrace& trace, const State& final_data) const;
  State apply_L(const State& x) const;

  double norm(const State& x) const;
  double inner(const State& x, const State& y) const;
  State zero() const { return {RVec(ops().dofs()), RVec(ops().dofs())}; }
  State random_state(std::uint64_t seed) const;

 private:
  void check_trace(const ObservationTrace& trace) const;

  std::shared_ptr<const FemOperators> ops_;
  WaveStepper stepper_;
};

template <class S>
concept BackAndForthSystem = requires(const S& s, const typename S::State& x,
                                      const ObservationTrace& trace, std::uint64_t seed) {
  { s.forward(trace) } -> std::same_as<typename S::State>;
  { s.backward(trace, x) } -> std::same_as<typename S::State>;
  { s.apply_L(x) } -> std::same_as<typename S::State>;
  { s.norm(x) } -> std::convertible_to<double>;
  { s.zero() } -> std::same_as<typename S::State>;
  { s.random_state(seed) } -> std::same_as<typename S::State>;
  { s.dt() } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Contraction factor.

struct EtaEstimate {
  enum class Kind { operator_norm, dominant_ratio };

  double value = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  Kind kind = Kind::operator_norm;
};

std::string to_string(EtaEstimate::Kind kind);

/// Power iteration on a linear map: returns the norm ratio ||A x_k|| / ||x_k||
/// once two successive ratios agree to `tol` (relative).
template <class State, class Apply, class Norm>
EtaEstimate power_iteration(Apply&& apply, Norm&& norm, State start, double tol, int max_iter) {
  if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("power_iteration: tol must be in (0,1)");
  if (max_iter < 2) throw std::invalid_argument("power_iteration: max_iter must be >= 2");
  EtaEstimate out;
  double n0 = norm(start);
  if (!(n0 > 0.0)) throw std::invalid_argument("power_iteration: zero start vector");
  scale_in_place(start, 1.0 / n0);
  double previous = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    State next = apply(start);
    const double ratio = norm(next);
    out.value = ratio;
    out.iterations = it;
    if (previous >= 0.0 && std::abs(ratio - previous) <= tol * ratio) {
      out.converged = true;
      return out;
    }
    if (ratio == 0.0) {
      out.converged = true;
      return out;
    }
    previous = ratio;
    scale_in_place(next, 1.0 / ratio);
    start = std::move(next);
  }
  return out;
}

/// eta_hat for the back-and-forth operator L of `system`, started from a
/// deterministic pseudo-random state. Operator norm for Schrodinger (L is
/// X-self-adjoint and positive); dominant-ratio estimate for the wave.
template <BackAndForthSystem System>
EtaEstimate estimate_eta(const System& system, double tol = 1e-10, int max_iter = 2000,
                         std::uint64_t seed = 20240917) {
  EtaEstimate est = power_iteration<typename System::State>(
      [&](const typename System::State& x) { return system.apply_L(x); },
      [&](const typename System::State& x) { return system.norm(x); },
      system.random_state(seed), tol, max_iter);
  est.kind = System::equation == Equation::schrodinger ? EtaEstimate::Kind::operator_norm
                                                       : EtaEstimate::Kind::dominant_ratio;
  return est;
}

// ---------------------------------------------------------------------------
// Truncation and Neumann reconstruction.

enum class TruncationMode { semi, full };

/// N = ceil(theta ln h / ln eta) (semi) or ceil(ln(h^theta + dt) / ln eta)
/// (full), floored at 0. Throws NotContractive when eta >= 1.
int choose_truncation(TruncationMode mode, double h, double dt, double theta, double eta);

inline constexpr int kAutoTruncationMin = 1;
inline constexpr int kAutoTruncationMax = 200;

struct NeumannPolicy {
  bool automatic = true;
  int fixed_terms = 0;     ///< N when not automatic
  double eta_hat = std::numeric_limits<double>::quiet_NaN();
  double theta = 1.0;

  static NeumannPolicy fixed(int n) { return {false, n, std::numeric_limits<double>::quiet_NaN(), 1.0}; }
  static NeumannPolicy automatic_from(double eta, double theta = 1.0) {
    return {true, 0, eta, theta};
  }
};

template <class State>
struct ReconstructionResult {
  State estimate;
  State backward_initial;               ///< (z_h^-)^0, the n = 0 term
  int n_used = 0;
  double eta_hat = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> increment_norms;  ///< ||L^n (z_h^-)^0||_X, n = 0..N
  long long time_steps = 0;             ///< implicit steps taken in total
  std::vector<std::string> warnings;
};

/// Resolves the number of Neumann terms for an automatic policy: clamps
/// choose_truncation to [kAutoTruncationMin, kAutoTruncationMax] and reports
/// clamping through `warnings`.
int resolve_truncation(const NeumannPolicy& policy, double h, double dt,
                       std::vector<std::string>& warnings);

/// sum_{n=0}^{N} L^n (z_h^-)^0 where (z_h^-)^0 = backward(trace, forward(trace)).
template <BackAndForthSystem System>
ReconstructionResult<typename System::State> neumann_reconstruct(const System& system,
                                                                 const ObservationTrace& trace,
                                                                 const NeumannPolicy& policy) {
  using State = typename System::State;
  ReconstructionResult<State> result;
  result.eta_hat = policy.eta_hat;
  result.n_used = resolve_truncation(policy, system.ops().mesh.h(), system.dt(), result.warnings);

  const State forward_final = system.forward(trace);
  result.backward_initial = system.backward(trace, forward_final);
  result.time_steps = 2LL * system.steps();

  result.estimate = result.backward_initial;
  State term = result.backward_initial;
  result.increment_norms.push_back(system.norm(term));
  for (int n = 1; n <= result.n_used; ++n) {
    term = system.apply_L(term);
    result.time_steps += 2LL * system.steps();
    axpy(1.0, term, result.estimate);
    result.increment_norms.push_back(system.norm(term));
  }
  return result;
}

struct FixedPointResult {
  int iterations = 0;
  bool converged = false;
  double last_increment = 0.0;
};

/// Solves (I - L) x = rhs by x <- rhs + L x until the increment falls below
/// `tol` times ||rhs||. Used as the long-run reference for Neumann tails.
template <BackAndForthSystem System>
typename System::State fixed_point_solve(const System& system, const typename System::State& rhs,
                                         double tol, int max_iter,
                                         FixedPointResult* info = nullptr) {
  using State = typename System::State;
  State x = rhs;
  State term = rhs;
  const double scale = system.norm(rhs);
  FixedPointResult r;
  for (int it = 1; it <= max_iter; ++it) {
    term = system.apply_L(term);
    axpy(1.0, term, x);
    r.iterations = it;
    r.last_increment = system.norm(term);
    if (r.last_increment <= tol * scale) {
      r.converged = true;
      break;
    }
  }
  if (scale == 0.0) r.converged = true;
  if (info) *info = r;
  return x;
}

}  // namespace bfo::observers
