#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "bfo/fem.hpp"
#include "bfo/models.hpp"
#include "bfo/observers.hpp"

namespace bfo::harness {

using fem::FemOperators;
using fem::FieldSpec;
using linalg::Complex;
using observers::Equation;
using observers::EtaEstimate;
using observers::WaveState;

enum class FitModel { pure_power, power_log2 };

std::string to_string(FitModel model);
FitModel parse_fit_model(std::string_view name);

struct Gates {
  std::optional<double> slope_min;
  std::optional<double> slope_max;
  bool require_monotone = false;
  std::optional<double> max_error;  ///< on the finest clean level
};

/// Mesh levels n_cells = base_cells * 2^j, j = 0..levels-1, with dt ~ kappa h.
struct SweepPlan {
  Equation equation = Equation::schrodinger;
  double length = 1.0;
  int base_cells = 32;
  int levels = 4;
  double kappa = 1.0;
  double tau = 1.0;
  fem::ObservationProfile profile = fem::ObservationProfile::standard();
  FieldSpec truth = FieldSpec::sine_sum({1.0, 0.5});
  FieldSpec truth_velocity = FieldSpec::sine_sum({});
  bool unsafe = false;
  int refine = 2;
  int max_fine_cells = static_cast<int>(linalg::kPencilMaxSize) + 1;  ///< exact-data budget
  std::vector<double> noise_eps{0.0};
  std::uint64_t noise_seed = 1;
  bool auto_terms = true;
  int fixed_terms = 0;
  double theta = 1.0;
  double eta_tol = 1e-10;
  int eta_max_iter = 2000;
  std::uint64_t seed = 20240917;  ///< power-iteration start vector
  FitModel fit_model = FitModel::power_log2;
  Gates gates;
  int workers = 0;  ///< 0: BFO_WORKERS, else hardware concurrency

  /// Default plan for `eq` on the unit interval (four levels from 32 cells).
  static SweepPlan defaults(Equation eq);

  std::vector<int> cells() const;
  models::ProblemInstance instance(int n_cells) const;
  void validate() const;
};

struct SweepRow {
  Equation equation = Equation::schrodinger;
  int n_cells = 0;
  double h = 0.0;
  double dt = 0.0;
  int n_used = 0;
  double eta_hat = 0.0;
  double noise_eps = 0.0;
  double error_x = 0.0;
  std::string fit_model;
  double wall_ms = 0.0;
  bool ok = true;
  std::string failure;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Errors in the norms of the convergence statements.

/// Discrete variants against truth coefficients on the same mesh:
/// M-norm (Schrodinger); K-norm of position + M-norm of velocity (wave).
double theorem_error(const FemOperators& ops, std::span<const Complex> truth,
                     std::span<const Complex> estimate);
double theorem_error(const FemOperators& ops, const WaveState& truth, const WaveState& estimate);

/// Against the closed-form truth by composite Gauss quadrature:
/// ||z0 - z_h||_{L2}, or |w0 - p_h|_{H1} + ||w1 - v_h||_{L2}.
double theorem_error_exact(const fem::Mesh1D& mesh, const FieldSpec& z0,
                           std::span<const Complex> estimate);
double theorem_error_exact(const fem::Mesh1D& mesh, const FieldSpec& w0, const FieldSpec& w1,
                           const WaveState& estimate);

// ---------------------------------------------------------------------------

/// One eta estimate per (equation, mesh, dt, steps, profile, tol, seed).
class EtaCache {
 public:
  template <class Compute>
  EtaEstimate get(const std::string& key, Compute&& compute) {
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    EtaEstimate value = compute();
    std::lock_guard lock(mutex_);
    return cache_.try_emplace(key, value).first->second;
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, EtaEstimate> cache_;
};

std::string eta_cache_key(Equation eq, const FemOperators& ops, double dt, int steps, double tol,
                          std::uint64_t seed);

/// Number of worker threads: `requested` if positive, else BFO_WORKERS, else
/// the hardware concurrency (at least 1).
int resolve_workers(int requested);

/// One row per (level, noise) cell, level-major and in plan order. A failing
/// cell is reported in its row (ok = false) and the sweep continues.
std::vector<SweepRow> run_sweep(const SweepPlan& plan, EtaCache* cache = nullptr);

// ---------------------------------------------------------------------------

struct FitResult {
  FitModel model = FitModel::power_log2;
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
  bool dropped_coarsest = false;
  int points = 0;
};

/// Least squares of log(error) against log(x) or log(x ln^2 x), x = h^theta
/// + dt. The coarsest level is dropped when its distance from the line fitted
/// through the finer levels exceeds three times their median residual (floor
/// 1e-9) and at least three points remain.
FitResult fit_rate(const std::vector<SweepRow>& rows, FitModel model, double theta = 1.0);

struct NoiseEntry {
  int n_cells = 0;
  double eps = 0.0;
  int n_used = 0;
  double error = 0.0;
  double inflation = 0.0;  ///< error(eps) - error(0)
  double ratio = 0.0;      ///< inflation / (N tau eps); NaN at eps = 0
};

struct NoiseStudy {
  std::vector<SweepRow> rows;
  std::vector<NoiseEntry> entries;
};

/// Runs the plan (which must include eps = 0) and tabulates error inflation.
NoiseStudy noise_study(const SweepPlan& plan, EtaCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Reports.

struct GateResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SweepSummary {
  std::optional<FitResult> fit;
  std::string fit_failure;
  std::vector<GateResult> gates;
  bool passed() const;
};

SweepSummary summarize(const SweepPlan& plan, const std::vector<SweepRow>& rows);

inline constexpr const char* kCsvHeader =
    "equation,h,dt,n_used,eta_hat,noise_eps,error_x,fit_model,wall_ms";

/// CSV with `comment_lines` emitted first, each prefixed by "# ".
void write_csv(std::ostream& out, const std::vector<SweepRow>& rows,
               const std::vector<std::string>& comment_lines = {});

/// JSON summary; `config_json` (a JSON document) is embedded under "config".
std::string summary_json(const SweepPlan& plan, const std::vector<SweepRow>& rows,
                         const SweepSummary& summary, const std::string& config_json = "{}");

}  // namespace bfo::harness
