#include "config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace bfo::cli {

namespace {

using observers::Equation;

const char* type_name(const json& v) {
  switch (v.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "boolean";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float: return "number";
    case json::value_t::string: return "string";
    case json::value_t::array: return "array";
    case json::value_t::object: return "object";
    default: return "value";
  }
}

/// Keys whose default is null but which accept a number.
bool nullable_number(const std::string& path) {
  return path == "time.dt" || path == "time.steps" || path == "sweep.gates.slope_min" ||
         path == "sweep.gates.slope_max" || path == "sweep.gates.max_error" ||
         path == "reconstruct.max_error";
}

void merge_checked(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(path, "unknown key");
    json& slot = base[it.key()];
    const json& value = it.value();
    if (slot.is_object()) {
      merge_checked(slot, value, path);
      continue;
    }
    const bool number_ok = slot.is_number() || (slot.is_null() && nullable_number(path));
    if (value.is_null() && nullable_number(path)) {
      slot = value;
    } else if (number_ok && value.is_number()) {
      slot = value;
    } else if (std::string(type_name(slot)) == type_name(value)) {
      slot = value;
    } else {
      throw ConfigError(path, std::string("expected ") +
                                  (number_ok ? "number" : type_name(slot)) + ", got " +
                                  type_name(value));
    }
  }
}

template <class T>
T get(const json& doc, const std::string& dotted) {
  const json* node = &doc;
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    std::size_t dot = dotted.find('.', pos);
    if (dot == std::string::npos) dot = dotted.size();
    node = &node->at(dotted.substr(pos, dot - pos));
    pos = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(dotted, e.what());
  }
}

int get_int(const json& doc, const std::string& dotted) {
  const double v = get<double>(doc, dotted);
  if (v != std::floor(v) || std::abs(v) > 2e9) throw ConfigError(dotted, "expected integer");
  return static_cast<int>(v);
}

std::uint64_t get_seed(const json& doc, const std::string& dotted) {
  const double v = get<double>(doc, dotted);
  if (v < 0 || v != std::floor(v)) throw ConfigError(dotted, "expected nonnegative integer");
  return get<std::uint64_t>(doc, dotted);
}

fem::FieldSpec field_from(const json& doc, const std::string& prefix, double length) {
  const auto kind = get<std::string>(doc, prefix + ".kind");
  if (kind == "sine_sum") {
    return fem::FieldSpec::sine_sum(get<std::vector<double>>(doc, prefix + ".coefficients"),
                                    length);
  }
  if (kind == "poly_bump") {
    return fem::FieldSpec::poly_bump(get<double>(doc, prefix + ".amplitude"), length);
  }
  throw ConfigError(prefix + ".kind", "expected sine_sum or poly_bump, got '" + kind + "'");
}

std::optional<double> optional_number(const json& doc, const std::string& dotted) {
  if (get<json>(doc, dotted).is_null()) return std::nullopt;
  return get<double>(doc, dotted);
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (name.empty()) return name;
  const std::filesystem::path p(name);
  if (p.is_absolute() || dir.empty()) return name;
  return (std::filesystem::path(dir) / p).string();
}

}  // namespace

json default_config(Equation eq) {
  const bool sch = eq == Equation::schrodinger;
  return json{
      {"equation", observers::to_string(eq)},
      {"geometry", {{"length", 1.0}, {"n_cells", 64}}},
      {"observation",
       {{"profile", "bump"}, {"a", 0.2}, {"b", 0.8}, {"smoothness", 2}, {"value", 1.0}}},
      {"time", {{"tau", models::default_tau(eq)}, {"kappa", 1.0}, {"dt", nullptr},
                {"steps", nullptr}}},
      {"truth",
       {{"kind", "sine_sum"},
        {"coefficients", sch ? std::vector<double>{1.0, 0.5} : std::vector<double>{1.0}},
        {"amplitude", 1.0}}},
      {"truth_velocity",
       {{"kind", "sine_sum"},
        {"coefficients", sch ? std::vector<double>{} : std::vector<double>{0.0, 1.0}},
        {"amplitude", 1.0}}},
      {"theta", 1.0},
      {"refine", 2},
      {"noise", {{"eps", 0.0}, {"seed", 1}}},
      {"neumann", {{"mode", "auto"}, {"terms", 0}}},
      {"eta", {{"tol", 1e-10}, {"max_iter", 2000}, {"cache", ""}}},
      {"seed", 20240917},
      {"unsafe", false},
      {"reconstruct", {{"max_error", nullptr}}},
      {"sweep",
       {{"base_cells", 32},
        {"levels", 4},
        {"noise_eps", std::vector<double>{0.0}},
        {"fit_model", "power-log2"},
        {"workers", 0},
        {"max_fine_cells", static_cast<int>(linalg::kPencilMaxSize) + 1},
        {"gates",
         {{"slope_min", 0.8}, {"slope_max", 1.15}, {"monotone", true}, {"max_error", nullptr}}}}},
      {"output",
       {{"dir", "."},
        {"trace", "trace.txt"},
        {"estimate", "estimate.txt"},
        {"diagnostics", "diagnostics.json"},
        {"csv", "sweep.csv"},
        {"summary", "summary.json"}}},
  };
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(std::string(assignment), "override must look like dotted.path=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw ConfigError(path, "empty path component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON in '") + path + "': " + e.what());
  }
}

RunConfig resolve_config(const json& user) {
  if (!user.is_object()) throw ConfigError("<root>", "expected a JSON object");
  Equation eq = Equation::schrodinger;
  if (user.contains("equation")) {
    if (!user["equation"].is_string()) throw ConfigError("equation", "expected string");
    try {
      eq = observers::parse_equation(user["equation"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("equation", e.what());
    }
  }
  RunConfig cfg;
  cfg.resolved = default_config(eq);
  merge_checked(cfg.resolved, user, "");
  const json& d = cfg.resolved;

  auto wrap = [](const std::string& path, auto&& fn) {
    try {
      return fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  };

  const double length = get<double>(d, "geometry.length");
  const int n_cells = get_int(d, "geometry.n_cells");
  auto& inst = cfg.instance;
  inst.equation = eq;
  inst.mesh = wrap("geometry", [&] { return fem::Mesh1D(length, n_cells); });

  const auto profile = get<std::string>(d, "observation.profile");
  if (profile == "bump") {
    const double a = get<double>(d, "observation.a");
    const double b = get<double>(d, "observation.b");
    if (!(a > 0.0 && b < length && a < b)) {
      throw ConfigError("observation", "window (a, b) = (" + std::to_string(a) + ", " +
                                           std::to_string(b) +
                                           ") must satisfy 0 < a < b < length");
    }
    inst.profile = wrap("observation", [&] {
      return fem::ObservationProfile::bump(a, b, get_int(d, "observation.smoothness"));
    });
  } else if (profile == "constant") {
    inst.profile = wrap("observation.value", [&] {
      return fem::ObservationProfile::constant(get<double>(d, "observation.value"));
    });
  } else {
    throw ConfigError("observation.profile", "expected bump or constant, got '" + profile + "'");
  }

  inst.tau = get<double>(d, "time.tau");
  if (!(inst.tau > 0.0)) throw ConfigError("time.tau", "must be positive");
  const double kappa = get<double>(d, "time.kappa");
  if (!(kappa > 0.0)) throw ConfigError("time.kappa", "must be positive");
  if (auto steps = optional_number(d, "time.steps")) {
    const int k = get_int(d, "time.steps");
    if (k < 1) throw ConfigError("time.steps", "must be at least 1");
    inst.steps = k;
    inst.dt = inst.tau / k;
  } else if (auto dt = optional_number(d, "time.dt")) {
    if (!(*dt > 0.0)) throw ConfigError("time.dt", "must be positive");
    const double k = std::round(inst.tau / *dt);
    if (k < 1 || std::abs(k * *dt - inst.tau) > 1e-9 * inst.tau) {
      throw ConfigError("time.dt", "tau must be an integer multiple of dt");
    }
    inst.steps = static_cast<int>(k);
    inst.dt = inst.tau / k;
  } else {
    std::tie(inst.steps, inst.dt) = models::time_grid(inst.tau, inst.mesh.h(), kappa);
  }

  inst.truth = field_from(d, "truth", length);
  inst.truth_velocity = field_from(d, "truth_velocity", length);
  inst.unsafe = get<bool>(d, "unsafe");
  wrap("instance", [&] {
    inst.validate();
    return 0;
  });

  cfg.theta = get<double>(d, "theta");
  if (!(cfg.theta > 0.0)) throw ConfigError("theta", "must be positive");
  cfg.refine = get_int(d, "refine");
  if (cfg.refine < 1) throw ConfigError("refine", "must be at least 1");
  cfg.noise.eps = get<double>(d, "noise.eps");
  if (!(cfg.noise.eps >= 0.0)) throw ConfigError("noise.eps", "must be nonnegative");
  cfg.noise.seed = get_seed(d, "noise.seed");

  const auto mode = get<std::string>(d, "neumann.mode");
  if (mode == "auto") {
    cfg.auto_terms = true;
  } else if (mode == "fixed") {
    cfg.auto_terms = false;
  } else {
    throw ConfigError("neumann.mode", "expected auto or fixed, got '" + mode + "'");
  }
  cfg.fixed_terms = get_int(d, "neumann.terms");
  if (cfg.fixed_terms < 0) throw ConfigError("neumann.terms", "must be >= 0");

  cfg.eta_tol = get<double>(d, "eta.tol");
  if (!(cfg.eta_tol > 0.0 && cfg.eta_tol < 1.0)) throw ConfigError("eta.tol", "must be in (0, 1)");
  cfg.eta_max_iter = get_int(d, "eta.max_iter");
  if (cfg.eta_max_iter < 2) throw ConfigError("eta.max_iter", "must be at least 2");
  cfg.seed = get_seed(d, "seed");
  cfg.reconstruct_max_error = optional_number(d, "reconstruct.max_error");

  cfg.out_dir = get<std::string>(d, "output.dir");
  cfg.trace_path = join_path(cfg.out_dir, get<std::string>(d, "output.trace"));
  cfg.estimate_path = join_path(cfg.out_dir, get<std::string>(d, "output.estimate"));
  cfg.diagnostics_path = join_path(cfg.out_dir, get<std::string>(d, "output.diagnostics"));
  cfg.csv_path = join_path(cfg.out_dir, get<std::string>(d, "output.csv"));
  cfg.summary_path = join_path(cfg.out_dir, get<std::string>(d, "output.summary"));
  cfg.eta_cache = join_path(cfg.out_dir, get<std::string>(d, "eta.cache"));

  auto& plan = cfg.plan;
  plan.equation = eq;
  plan.length = length;
  plan.base_cells = get_int(d, "sweep.base_cells");
  plan.levels = get_int(d, "sweep.levels");
  plan.kappa = kappa;
  plan.tau = inst.tau;
  plan.profile = inst.profile;
  plan.truth = inst.truth;
  plan.truth_velocity = inst.truth_velocity;
  plan.unsafe = inst.unsafe;
  plan.refine = cfg.refine;
  plan.max_fine_cells = get_int(d, "sweep.max_fine_cells");
  plan.noise_eps = get<std::vector<double>>(d, "sweep.noise_eps");
  plan.noise_seed = cfg.noise.seed;
  plan.auto_terms = cfg.auto_terms;
  plan.fixed_terms = cfg.fixed_terms;
  plan.theta = cfg.theta;
  plan.eta_tol = cfg.eta_tol;
  plan.eta_max_iter = cfg.eta_max_iter;
  plan.seed = cfg.seed;
  plan.fit_model = wrap("sweep.fit_model", [&] {
    return harness::parse_fit_model(get<std::string>(d, "sweep.fit_model"));
  });
  plan.workers = get_int(d, "sweep.workers");
  plan.gates.slope_min = optional_number(d, "sweep.gates.slope_min");
  plan.gates.slope_max = optional_number(d, "sweep.gates.slope_max");
  plan.gates.require_monotone = get<bool>(d, "sweep.gates.monotone");
  plan.gates.max_error = optional_number(d, "sweep.gates.max_error");
  wrap("sweep", [&] {
    plan.validate();
    return 0;
  });
  return cfg;
}

}  // namespace bfo::cli
