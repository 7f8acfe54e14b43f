#include "bfo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bfo/errors.hpp"
#include "json.hpp"

namespace bfo::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double fit_abscissa(const SweepRow& row, FitModel model, double theta) {
  const double x = std::pow(row.h, theta) + row.dt;
  if (model == FitModel::pure_power) return std::log(x);
  const double l = std::log(x);
  return std::log(x * l * l);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> residuals;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 1e-14 * std::max(1.0, mx * mx))) {
    throw std::invalid_argument("fit_rate: degenerate abscissae (all levels coincide)");
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    f.residuals.push_back(y[i] - (f.intercept + f.slope * x[i]));
  }
  return f;
}

double median_abs(std::vector<double> v) {
  for (auto& e : v) e = std::abs(e);
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct LevelData {
  models::ProblemInstance instance;
  std::shared_ptr<const FemOperators> ops;
  observers::ObservationTrace clean;
  EtaEstimate eta;
  std::string failure;
};

template <class System>
void reconstruct_cell(const SweepPlan& plan, const LevelData& level, const System& system,
                      const observers::ObservationTrace& trace, SweepRow& row) {
  const auto& inst = level.instance;
  observers::NeumannPolicy policy =
      plan.auto_terms ? observers::NeumannPolicy::automatic_from(level.eta.value, plan.theta)
                      : observers::NeumannPolicy::fixed(plan.fixed_terms);
  auto result = observers::neumann_reconstruct(system, trace, policy);
  row.n_used = result.n_used;
  row.warnings = std::move(result.warnings);
  if constexpr (std::is_same_v<System, observers::SchrodingerObserver>) {
    row.error_x = theorem_error_exact(inst.mesh, inst.truth, result.estimate);
  } else {
    row.error_x =
        theorem_error_exact(inst.mesh, inst.truth, inst.truth_velocity, result.estimate);
  }
}

template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const std::size_t n_threads = std::min<std::size_t>(std::max(1, workers), count);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::string to_string(FitModel model) {
  return model == FitModel::pure_power ? "pure-power" : "power-log2";
}

FitModel parse_fit_model(std::string_view name) {
  if (name == "pure-power") return FitModel::pure_power;
  if (name == "power-log2") return FitModel::power_log2;
  throw std::invalid_argument("unknown fit model '" + std::string(name) +
                              "' (expected pure-power or power-log2)");
}

// ---------------------------------------------------------------------------

SweepPlan SweepPlan::defaults(Equation eq) {
  SweepPlan p;
  p.equation = eq;
  p.tau = models::default_tau(eq);
  if (eq == Equation::schrodinger) {
    p.truth = FieldSpec::sine_sum({1.0, 0.5});
  } else {
    p.truth = FieldSpec::sine_sum({1.0});
    p.truth_velocity = FieldSpec::sine_sum({0.0, 1.0});
  }
  return p;
}

std::vector<int> SweepPlan::cells() const {
  std::vector<int> out;
  for (int j = 0; j < levels; ++j) out.push_back(base_cells << j);
  return out;
}

models::ProblemInstance SweepPlan::instance(int n_cells) const {
  models::ProblemInstance p;
  p.equation = equation;
  p.mesh = fem::Mesh1D(length, n_cells);
  p.profile = profile;
  p.tau = tau;
  std::tie(p.steps, p.dt) = models::time_grid(tau, p.mesh.h(), kappa);
  p.truth = truth;
  p.truth_velocity = truth_velocity;
  p.unsafe = unsafe;
  return p;
}

void SweepPlan::validate() const {
  if (base_cells < 2) throw std::invalid_argument("base_cells: must be at least 2");
  if (levels < 1 || levels > 16) throw std::invalid_argument("levels: must be in [1, 16]");
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa: must be positive");
  if (refine < 1) throw std::invalid_argument("refine: must be at least 1");
  if (max_fine_cells < 2) throw std::invalid_argument("max_fine_cells: must be at least 2");
  if (!auto_terms && fixed_terms < 0) throw std::invalid_argument("terms: must be >= 0");
  if (!(theta > 0.0)) throw std::invalid_argument("theta: must be positive");
  if (noise_eps.empty()) throw std::invalid_argument("noise_eps: need at least one level");
  for (double e : noise_eps) {
    if (!(e >= 0.0)) throw std::invalid_argument("noise_eps: entries must be >= 0");
  }
  instance(base_cells).validate();
}

// ---------------------------------------------------------------------------

double theorem_error(const FemOperators& ops, std::span<const Complex> truth,
                     std::span<const Complex> estimate) {
  if (truth.size() != ops.dofs() || estimate.size() != ops.dofs()) {
    throw DimensionMismatch("theorem_error: vectors do not match the mesh");
  }
  linalg::CVec d(truth.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = truth[i] - estimate[i];
  return fem::norm_alpha(ops, std::span<const Complex>(d), 0.0);
}

double theorem_error(const FemOperators& ops, const WaveState& truth, const WaveState& estimate) {
  const std::size_t n = ops.dofs();
  if (truth.position.size() != n || truth.velocity.size() != n || estimate.position.size() != n ||
      estimate.velocity.size() != n) {
    throw DimensionMismatch("theorem_error: vectors do not match the mesh");
  }
  linalg::RVec dp(n), dv(n);
  for (std::size_t i = 0; i < n; ++i) {
    dp[i] = truth.position[i] - estimate.position[i];
    dv[i] = truth.velocity[i] - estimate.velocity[i];
  }
  return fem::norm_alpha(ops, std::span<const double>(dp), 0.5) +
         fem::norm_alpha(ops, std::span<const double>(dv), 0.0);
}

double theorem_error_exact(const fem::Mesh1D& mesh, const FieldSpec& z0,
                           std::span<const Complex> estimate) {
  if (estimate.size() != mesh.dofs()) {
    throw DimensionMismatch("theorem_error_exact: estimate does not match the mesh");
  }
  return fem::l2_error(mesh, z0, estimate);
}

double theorem_error_exact(const fem::Mesh1D& mesh, const FieldSpec& w0, const FieldSpec& w1,
                           const WaveState& estimate) {
  if (estimate.position.size() != mesh.dofs() || estimate.velocity.size() != mesh.dofs()) {
    throw DimensionMismatch("theorem_error_exact: estimate does not match the mesh");
  }
  return fem::h1_seminorm_error(mesh, w0, estimate.position) +
         fem::l2_error(mesh, w1, estimate.velocity);
}

// ---------------------------------------------------------------------------

std::string eta_cache_key(Equation eq, const FemOperators& ops, double dt, int steps, double tol,
                          std::uint64_t seed) {
  std::ostringstream os;
  os << observers::to_string(eq) << '|' << fmt17(ops.mesh.length) << '|' << ops.mesh.n_cells
     << '|' << fmt17(dt) << '|' << steps << '|' << ops.profile.describe() << '|' << fmt17(tol)
     << '|' << seed;
  return os.str();
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BFO_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SweepRow> run_sweep(const SweepPlan& plan, EtaCache* cache) {
  plan.validate();
  EtaCache local_cache;
  EtaCache& etas = cache ? *cache : local_cache;
  const std::vector<int> cells = plan.cells();
  const int workers = resolve_workers(plan.workers);

  // Per-level data (exact observations, eta) first, then the (level, noise) cells.
  std::vector<LevelData> levels(cells.size());
  std::vector<double> level_ms(cells.size(), 0.0);
  parallel_for(cells.size(), workers, [&](std::size_t j) {
    const auto t0 = std::chrono::steady_clock::now();
    LevelData& L = levels[j];
    try {
      L.instance = plan.instance(cells[j]);
      if (static_cast<long long>(cells[j]) * plan.refine > plan.max_fine_cells) {
        throw std::invalid_argument("refine: level with " + std::to_string(cells[j]) +
                                    " cells needs " + std::to_string(cells[j] * plan.refine) +
                                    " fine cells, above max_fine_cells = " +
                                    std::to_string(plan.max_fine_cells));
      }
      L.ops = std::make_shared<const FemOperators>(
          fem::assemble(L.instance.mesh, L.instance.profile));
      L.clean = models::generate_observation(L.instance, plan.refine);
      const auto key = eta_cache_key(plan.equation, *L.ops, L.instance.dt, L.instance.steps,
                                     plan.eta_tol, plan.seed);
      L.eta = etas.get(key, [&] {
        if (plan.equation == Equation::schrodinger) {
          observers::SchrodingerObserver sys(L.ops, L.instance.dt, L.instance.steps);
          return observers::estimate_eta(sys, plan.eta_tol, plan.eta_max_iter, plan.seed);
        }
        observers::WaveObserver sys(L.ops, L.instance.dt, L.instance.steps);
        return observers::estimate_eta(sys, plan.eta_tol, plan.eta_max_iter, plan.seed);
      });
    } catch (const std::exception& e) {
      L.failure = e.what();
    }
    level_ms[j] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  const std::size_t n_noise = plan.noise_eps.size();
  std::vector<SweepRow> rows(cells.size() * n_noise);
  parallel_for(rows.size(), workers, [&](std::size_t idx) {
    const std::size_t j = idx / n_noise;
    const double eps = plan.noise_eps[idx % n_noise];
    const LevelData& L = levels[j];
    SweepRow& row = rows[idx];
    row.equation = plan.equation;
    row.n_cells = cells[j];
    row.h = plan.length / cells[j];
    row.noise_eps = eps;
    row.fit_model = to_string(plan.fit_model);
    row.eta_hat = L.eta.value;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (!L.failure.empty()) throw std::runtime_error(L.failure);
      row.dt = L.instance.dt;
      const auto trace =
          models::add_noise(L.clean, {eps, plan.noise_seed + static_cast<std::uint64_t>(j)});
      if (plan.equation == Equation::schrodinger) {
        observers::SchrodingerObserver sys(L.ops, L.instance.dt, L.instance.steps);
        reconstruct_cell(plan, L, sys, trace, row);
      } else {
        observers::WaveObserver sys(L.ops, L.instance.dt, L.instance.steps);
        reconstruct_cell(plan, L, sys, trace, row);
      }
      if (!L.eta.converged) {
        row.warnings.push_back("eta power iteration did not converge in " +
                               std::to_string(L.eta.iterations) + " iterations");
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.failure = e.what();
      row.error_x = kNaN;
    }
    row.wall_ms =
        level_ms[j] +
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  return rows;
}

// ---------------------------------------------------------------------------

FitResult fit_rate(const std::vector<SweepRow>& rows, FitModel model, double theta) {
  std::vector<const SweepRow*> usable;
  for (const auto& r : rows) {
    if (r.ok && std::isfinite(r.error_x) && r.error_x > 0.0) usable.push_back(&r);
  }
  if (usable.size() < 3) {
    throw std::invalid_argument("fit_rate: need at least 3 usable rows, got " +
                                std::to_string(usable.size()));
  }
  std::sort(usable.begin(), usable.end(), [&](const SweepRow* a, const SweepRow* b) {
    const double xa = std::pow(a->h, theta) + a->dt;
    const double xb = std::pow(b->h, theta) + b->dt;
    if (xa != xb) return xa > xb;
    return a->error_x < b->error_x;
  });
  std::vector<double> x, y;
  for (const auto* r : usable) {
    const double xa = std::pow(r->h, theta) + r->dt;
    if (!(xa < 1.0)) throw std::invalid_argument("fit_rate: h^theta + dt must be below 1");
    x.push_back(fit_abscissa(*r, model, theta));
    y.push_back(std::log(r->error_x));
  }
  LineFit f = least_squares(x, y);
  FitResult out;
  out.model = model;
  if (x.size() >= 4) {
    // Judge the coarsest level against the line through the finer ones; its
    // own least-squares residual is damped by its leverage.
    const std::vector<double> xf(x.begin() + 1, x.end()), yf(y.begin() + 1, y.end());
    const LineFit finer = least_squares(xf, yf);
    const double off = std::abs(y.front() - (finer.intercept + finer.slope * x.front()));
    if (off > 3.0 * std::max(median_abs(finer.residuals), 1e-9)) {
      x.erase(x.begin());
      y.erase(y.begin());
      f = finer;
      out.dropped_coarsest = true;
    }
  }
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.points = static_cast<int>(x.size());
  for (double r : f.residuals) out.max_residual = std::max(out.max_residual, std::abs(r));
  return out;
}

NoiseStudy noise_study(const SweepPlan& plan, EtaCache* cache) {
  if (std::find(plan.noise_eps.begin(), plan.noise_eps.end(), 0.0) == plan.noise_eps.end()) {
    throw std::invalid_argument("noise_study: plan must include eps = 0");
  }
  NoiseStudy study;
  study.rows = run_sweep(plan, cache);
  std::map<int, const SweepRow*> baseline;
  for (const auto& r : study.rows) {
    if (r.noise_eps == 0.0 && r.ok) baseline[r.n_cells] = &r;
  }
  for (const auto& r : study.rows) {
    NoiseEntry e;
    e.n_cells = r.n_cells;
    e.eps = r.noise_eps;
    e.n_used = r.n_used;
    e.error = r.error_x;
    auto it = baseline.find(r.n_cells);
    if (!r.ok || it == baseline.end()) {
      e.inflation = kNaN;
      e.ratio = kNaN;
    } else if (r.noise_eps == 0.0) {
      e.inflation = 0.0;
      e.ratio = kNaN;
    } else {
      e.inflation = r.error_x - it->second->error_x;
      const double scale = std::max(r.n_used, 1) * plan.tau * r.noise_eps;
      e.ratio = e.inflation / scale;
    }
    study.entries.push_back(e);
  }
  return study;
}

// ---------------------------------------------------------------------------

bool SweepSummary::passed() const {
  return std::all_of(gates.begin(), gates.end(), [](const GateResult& g) { return g.passed; });
}

SweepSummary summarize(const SweepPlan& plan, const std::vector<SweepRow>& rows) {
  SweepSummary s;
  std::vector<SweepRow> clean;
  int failed = 0;
  for (const auto& r : rows) {
    if (!r.ok) ++failed;
    if (r.noise_eps == 0.0) clean.push_back(r);
  }
  {
    GateResult g{"cells_ok", failed == 0, std::to_string(failed) + " failed cell(s)"};
    s.gates.push_back(g);
  }
  if (clean.size() >= 3) {
    try {
      s.fit = fit_rate(clean, plan.fit_model, plan.theta);
    } catch (const std::exception& e) {
      s.fit_failure = e.what();
    }
  } else {
    s.fit_failure = "fewer than 3 clean rows";
  }
  const auto& gates = plan.gates;
  if (gates.slope_min || gates.slope_max) {
    GateResult g{"slope_band", false, ""};
    if (s.fit) {
      const double lo = gates.slope_min.value_or(-std::numeric_limits<double>::infinity());
      const double hi = gates.slope_max.value_or(std::numeric_limits<double>::infinity());
      g.passed = s.fit->slope >= lo && s.fit->slope <= hi;
      g.detail = "slope " + fmt17(s.fit->slope) + " in [" + fmt17(lo) + ", " + fmt17(hi) + "]";
    } else {
      g.detail = "no fit: " + s.fit_failure;
    }
    s.gates.push_back(g);
  }
  if (gates.require_monotone) {
    std::vector<const SweepRow*> sorted;
    for (const auto& r : clean) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const SweepRow* a, const SweepRow* b) { return a->h > b->h; });
    bool ok = !sorted.empty();
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (!sorted[i]->ok) ok = false;
      if (i > 0 && !(sorted[i]->error_x < sorted[i - 1]->error_x)) ok = false;
    }
    s.gates.push_back({"monotone_decrease", ok, ok ? "errors strictly decrease"
                                                   : "errors do not strictly decrease"});
  }
  if (gates.max_error) {
    const SweepRow* finest = nullptr;
    for (const auto& r : clean) {
      if (!finest || r.h < finest->h) finest = &r;
    }
    const bool ok = finest && finest->ok && finest->error_x <= *gates.max_error;
    s.gates.push_back({"max_error", ok,
                       finest ? "finest error " + fmt17(finest->error_x) + " vs " +
                                    fmt17(*gates.max_error)
                              : "no clean row"});
  }
  return s;
}

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows,
               const std::vector<std::string>& comment_lines) {
  for (const auto& c : comment_lines) out << "# " << c << '\n';
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << observers::to_string(r.equation) << ',' << fmt17(r.h) << ',' << fmt17(r.dt) << ','
        << r.n_used << ',' << fmt17(r.eta_hat) << ',' << fmt17(r.noise_eps) << ','
        << (r.ok ? fmt17(r.error_x) : std::string("nan")) << ',' << r.fit_model << ','
        << fmt17(r.wall_ms) << '\n';
  }
}

std::string summary_json(const SweepPlan& plan, const std::vector<SweepRow>& rows,
                         const SweepSummary& summary, const std::string& config_json) {
  using nlohmann::json;
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["config"] = json::parse(config_json);
  j["equation"] = observers::to_string(plan.equation);
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json row{{"n_cells", r.n_cells},   {"h", r.h},
             {"dt", r.dt},             {"n_used", r.n_used},
             {"eta_hat", num(r.eta_hat)}, {"noise_eps", r.noise_eps},
             {"error_x", num(r.error_x)}, {"wall_ms", r.wall_ms},
             {"ok", r.ok}};
    if (!r.ok) row["failure"] = r.failure;
    if (!r.warnings.empty()) row["warnings"] = r.warnings;
    j["rows"].push_back(std::move(row));
  }
  if (summary.fit) {
    const auto& f = *summary.fit;
    j["fit"] = {{"model", to_string(f.model)},       {"slope", f.slope},
                {"intercept", f.intercept},          {"max_residual", f.max_residual},
                {"dropped_coarsest", f.dropped_coarsest}, {"points", f.points}};
  } else {
    j["fit"] = nullptr;
    j["fit_failure"] = summary.fit_failure;
  }
  j["gates"] = json::array();
  for (const auto& g : summary.gates) {
    j["gates"].push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
  }
  j["passed"] = summary.passed();
  return j.dump(2);
}

}  // namespace bfo::harness
