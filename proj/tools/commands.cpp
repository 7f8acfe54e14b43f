#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "bfo/errors.hpp"
#include "config.hpp"

namespace bfo::cli {

namespace {

using observers::Equation;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string trace_path;
  std::string out_path;
};

RunConfig load(const Options& opt) {
  json user = load_config_file(opt.config_path);
  for (const auto& o : opt.overrides) apply_override(user, o);
  return resolve_config(user);
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
}

std::shared_ptr<const fem::FemOperators> assemble_for(const models::ProblemInstance& inst) {
  return std::make_shared<const fem::FemOperators>(fem::assemble(inst.mesh, inst.profile));
}

json eta_json(const observers::EtaEstimate& e) {
  return {{"value", e.value},
          {"converged", e.converged},
          {"iterations", e.iterations},
          {"kind", observers::to_string(e.kind)}};
}

/// Estimate for the config geometry, through the optional on-disk cache.
observers::EtaEstimate eta_for(const RunConfig& cfg,
                               std::shared_ptr<const fem::FemOperators> ops, bool* cached) {
  const auto& inst = cfg.instance;
  const auto key =
      harness::eta_cache_key(inst.equation, *ops, inst.dt, inst.steps, cfg.eta_tol, cfg.seed);
  json store = json::object();
  if (!cfg.eta_cache.empty() && std::filesystem::exists(cfg.eta_cache)) {
    std::ifstream in(cfg.eta_cache);
    store = json::parse(in, nullptr, false);
    if (!store.is_object()) store = json::object();
  }
  if (store.contains(key)) {
    const auto& e = store[key];
    observers::EtaEstimate est;
    est.value = e.at("value").get<double>();
    est.converged = e.at("converged").get<bool>();
    est.iterations = e.at("iterations").get<int>();
    est.kind = e.at("kind").get<std::string>() == "operator_norm"
                   ? observers::EtaEstimate::Kind::operator_norm
                   : observers::EtaEstimate::Kind::dominant_ratio;
    if (cached) *cached = true;
    return est;
  }
  observers::EtaEstimate est;
  if (inst.equation == Equation::schrodinger) {
    observers::SchrodingerObserver sys(ops, inst.dt, inst.steps);
    est = observers::estimate_eta(sys, cfg.eta_tol, cfg.eta_max_iter, cfg.seed);
  } else {
    observers::WaveObserver sys(ops, inst.dt, inst.steps);
    est = observers::estimate_eta(sys, cfg.eta_tol, cfg.eta_max_iter, cfg.seed);
  }
  if (!cfg.eta_cache.empty()) {
    store[key] = eta_json(est);
    write_text(cfg.eta_cache, store.dump(2) + "\n");
  }
  if (cached) *cached = false;
  return est;
}

std::string header_mismatch(const observers::TraceHeader& trace, const RunConfig& cfg) {
  const auto& inst = cfg.instance;
  std::ostringstream why;
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
  if (trace.equation != inst.equation) why << " equation";
  if (!close(trace.length, inst.mesh.length)) why << " length";
  if (trace.n_cells != inst.mesh.n_cells) why << " n_cells";
  if (trace.steps != inst.steps) why << " steps";
  if (!close(trace.dt, inst.dt)) why << " dt";
  if (!(trace.profile == inst.profile)) why << " profile";
  if (why.str().empty()) return {};
  observers::TraceHeader expected;
  expected.equation = inst.equation;
  expected.length = inst.mesh.length;
  expected.n_cells = inst.mesh.n_cells;
  expected.tau = inst.tau;
  expected.dt = inst.dt;
  expected.steps = inst.steps;
  expected.profile = inst.profile;
  expected.refine = cfg.refine;
  return "trace header does not match the configuration (differs in:" + why.str() +
         ")\n--- trace header ---\n" + models::trace_header_text(trace) +
         "--- config header ---\n" + models::trace_header_text(expected);
}

int cmd_generate(const Options& opt, std::ostream& out) {
  const RunConfig cfg = load(opt);
  const std::string path = opt.out_path.empty() ? cfg.trace_path : opt.out_path;
  const auto trace = models::generate_observation(cfg.instance, cfg.refine, cfg.noise);
  ensure_parent(path);
  models::write_trace(path, trace);
  out << path << " " << models::file_checksum(path) << " rows=" << trace.sample_count() << "\n";
  return kExitOk;
}

template <class System>
json reconstruct_with(const RunConfig& cfg, const System& sys,
                      const observers::ObservationTrace& trace, const observers::EtaEstimate& eta,
                      const std::string& estimate_path) {
  const auto policy = cfg.auto_terms
                          ? observers::NeumannPolicy::automatic_from(eta.value, cfg.theta)
                          : observers::NeumannPolicy::fixed(cfg.fixed_terms);
  auto result = observers::neumann_reconstruct(sys, trace, policy);
  ensure_parent(estimate_path);
  models::write_estimate(estimate_path, trace.header, result.estimate);
  json d;
  d["n_used"] = result.n_used;
  d["increment_norms"] = result.increment_norms;
  d["time_steps"] = result.time_steps;
  d["warnings"] = result.warnings;
  const auto& inst = cfg.instance;
  if constexpr (std::is_same_v<System, observers::SchrodingerObserver>) {
    d["error_x"] = harness::theorem_error_exact(inst.mesh, inst.truth, result.estimate);
  } else {
    d["error_x"] = harness::theorem_error_exact(inst.mesh, inst.truth, inst.truth_velocity,
                                                result.estimate);
  }
  return d;
}

int cmd_reconstruct(const Options& opt, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load(opt);
  const std::string trace_path = opt.trace_path.empty() ? cfg.trace_path : opt.trace_path;
  const std::string estimate_path = opt.out_path.empty() ? cfg.estimate_path : opt.out_path;
  const auto trace = models::read_trace(trace_path);
  if (auto why = header_mismatch(trace.header, cfg); !why.empty()) {
    err << why;
    return kExitRuntime;
  }
  const auto ops = assemble_for(cfg.instance);
  bool cached = false;
  const auto eta = eta_for(cfg, ops, &cached);
  if (cfg.auto_terms && !(eta.value < 1.0)) {
    err << "eta_hat = " << eta.value << " >= 1: contraction not certified, refusing to "
        << "reconstruct in auto mode\n";
    return kExitRuntime;
  }
  json d;
  if (cfg.instance.equation == Equation::schrodinger) {
    observers::SchrodingerObserver sys(ops, cfg.instance.dt, cfg.instance.steps);
    d = reconstruct_with(cfg, sys, trace, eta, estimate_path);
  } else {
    observers::WaveObserver sys(ops, cfg.instance.dt, cfg.instance.steps);
    d = reconstruct_with(cfg, sys, trace, eta, estimate_path);
  }
  d["config"] = cfg.resolved;
  d["trace"] = {{"path", trace_path},
                {"provenance", trace.header.provenance},
                {"noise_eps", trace.header.noise_eps},
                {"refine", trace.header.refine}};
  d["eta"] = eta_json(eta);
  d["eta"]["cached"] = cached;
  d["estimate"] = estimate_path;
  bool passed = true;
  if (cfg.reconstruct_max_error) {
    passed = d["error_x"].get<double>() <= *cfg.reconstruct_max_error;
    d["gate"] = {{"max_error", *cfg.reconstruct_max_error}, {"passed", passed}};
  }
  write_text(cfg.diagnostics_path, d.dump(2) + "\n");
  out << "eta_hat=" << std::setprecision(17) << eta.value << " n_used=" << d["n_used"]
      << " error_x=" << d["error_x"].get<double>() << "\n"
      << "estimate " << estimate_path << "\n"
      << "diagnostics " << cfg.diagnostics_path << "\n";
  return passed ? kExitOk : kExitGate;
}

int cmd_estimate_eta(const Options& opt, std::ostream& out) {
  const RunConfig cfg = load(opt);
  const auto ops = assemble_for(cfg.instance);
  bool cached = false;
  const auto eta = eta_for(cfg, ops, &cached);
  out << std::setprecision(17) << "eta_hat=" << eta.value
      << " kind=" << observers::to_string(eta.kind) << " converged=" << std::boolalpha
      << eta.converged << " iterations=" << eta.iterations << " cached=" << cached << "\n";
  return kExitOk;
}

int cmd_sweep(const Options& opt, std::ostream& out) {
  const RunConfig cfg = load(opt);
  const auto rows = harness::run_sweep(cfg.plan);
  const auto summary = harness::summarize(cfg.plan, rows);
  const std::string csv_path = opt.out_path.empty() ? cfg.csv_path : opt.out_path;
  {
    std::ostringstream csv;
    harness::write_csv(csv, rows, {"bfo sweep", "config=" + cfg.resolved.dump()});
    write_text(csv_path, csv.str());
  }
  write_text(cfg.summary_path,
             harness::summary_json(cfg.plan, rows, summary, cfg.resolved.dump()) + "\n");
  harness::write_csv(out, rows);
  if (summary.fit) {
    out << "fit " << harness::to_string(summary.fit->model) << " slope=" << summary.fit->slope
        << " max_residual=" << summary.fit->max_residual << "\n";
  }
  for (const auto& g : summary.gates) {
    out << (g.passed ? "PASS " : "FAIL ") << g.name << ": " << g.detail << "\n";
  }
  for (const auto& r : rows) {
    if (!r.ok) out << "cell n_cells=" << r.n_cells << " eps=" << r.noise_eps << " failed: "
                   << r.failure << "\n";
  }
  out << "csv " << csv_path << "\nsummary " << cfg.summary_path << "\n";
  return summary.passed() ? kExitOk : kExitGate;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Back-and-forth observer reconstruction of initial states"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config_path, "JSON configuration file");
    sub->add_option("--set", opt.overrides, "Override a config leaf: dotted.path=value")
        ->take_all();
  };
  auto* gen = app.add_subcommand("generate", "Generate a synthetic observation trace");
  add_common(gen);
  gen->add_option("-o,--out", opt.out_path, "Trace output path (default output.dir/trace.txt)");
  auto* rec = app.add_subcommand("reconstruct", "Reconstruct the initial state from a trace");
  add_common(rec);
  rec->add_option("-t,--trace", opt.trace_path, "Trace file (default output.dir/trace.txt)");
  rec->add_option("-o,--out", opt.out_path, "Estimate output path (default output.dir/estimate.txt)");
  auto* eta = app.add_subcommand("estimate-eta", "Estimate the contraction factor");
  add_common(eta);
  auto* sweep = app.add_subcommand("sweep", "Run a convergence sweep");
  add_common(sweep);
  sweep->add_option("-o,--out", opt.out_path, "CSV output path (default output.dir/sweep.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(opt, out);
    if (rec->parsed()) return cmd_reconstruct(opt, out, err);
    if (eta->parsed()) return cmd_estimate_eta(opt, out);
    if (sweep->parsed()) return cmd_sweep(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NotContractive& e) {
    err << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace bfo::cli
