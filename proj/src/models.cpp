#include "bfo/models.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bfo::models {

namespace {

double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
void write_row(std::ostream& out, const std::vector<T>& row) {
  bool first = true;
  for (const auto& v : row) {
    if constexpr (std::is_same_v<T, Complex>) {
      out << (first ? "" : ",") << fmt17(v.real()) << ',' << fmt17(v.imag());
    } else {
      out << (first ? "" : ",") << fmt17(v);
    }
    first = false;
  }
  out << '\n';
}

RVec parse_row(const std::string& line, std::size_t line_no) {
  RVec values;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    const std::string cell = line.substr(pos, comma - pos);
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": bad number '" +
                               cell + "'");
    }
    values.push_back(v);
    pos = comma + 1;
  }
  return values;
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("trace header missing '" + key + "'");
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw std::runtime_error("trace header: '" + key + "' is not a number: " + it->second);
  }
}

long long to_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  const double v = to_double(kv, key);
  if (v != std::floor(v)) throw std::runtime_error("trace header: '" + key + "' must be integer");
  return static_cast<long long>(v);
}

}  // namespace

// ---------------------------------------------------------------------------

void ProblemInstance::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("tau: must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("dt: must be positive");
  if (steps < 1) throw std::invalid_argument("steps: must be at least 1");
  if (std::abs(steps * dt - tau) > 1e-9 * tau) {
    throw std::invalid_argument("tau: must equal steps * dt (got " + fmt17(tau) + " vs " +
                                std::to_string(steps) + " * " + fmt17(dt) + ")");
  }
  if (profile.kind() == ObservationProfile::Kind::bump &&
      !(profile.a() > 0.0 && profile.b() < mesh.length)) {
    throw std::invalid_argument("observation window (a, b) = (" + fmt17(profile.a()) + ", " +
                                fmt17(profile.b()) + ") must lie strictly inside (0, " +
                                fmt17(mesh.length) + ")");
  }
  if (!unsafe) {
    if (!truth.regular()) {
      throw std::invalid_argument("truth: " + truth.describe() +
                                  " has no regularity guarantee (set unsafe to allow)");
    }
    if (equation == Equation::wave && !truth_velocity.regular()) {
      throw std::invalid_argument("truth_velocity: " + truth_velocity.describe() +
                                  " has no regularity guarantee (set unsafe to allow)");
    }
  }
  if (truth.kind() != FieldSpec::Kind::custom && std::abs(truth.length() - mesh.length) > 1e-12) {
    throw std::invalid_argument("truth: defined on length " + fmt17(truth.length()) +
                                ", mesh has length " + fmt17(mesh.length));
  }
}

double default_tau(Equation eq) { return eq == Equation::schrodinger ? 1.0 : 2.0; }

std::pair<int, double> time_grid(double tau, double h, double kappa) {
  if (!(tau > 0.0 && h > 0.0 && kappa > 0.0)) {
    throw std::invalid_argument("time_grid: tau, h and kappa must be positive");
  }
  const int steps = std::max(1, static_cast<int>(std::ceil(tau / (kappa * h) - 1e-9)));
  return {steps, tau / steps};
}

ProblemInstance default_instance(Equation eq, int n_cells, double kappa) {
  ProblemInstance p;
  p.equation = eq;
  p.mesh = Mesh1D(1.0, n_cells);
  p.profile = ObservationProfile::standard(1.0);
  p.tau = default_tau(eq);
  std::tie(p.steps, p.dt) = time_grid(p.tau, p.mesh.h(), kappa);
  if (eq == Equation::schrodinger) {
    p.truth = FieldSpec::sine_sum({1.0, 0.5});
  } else {
    p.truth = FieldSpec::sine_sum({1.0});
    p.truth_velocity = FieldSpec::sine_sum({0.0, 1.0});
  }
  return p;
}

// ---------------------------------------------------------------------------

ExactPropagator::ExactPropagator(const ProblemInstance& instance, int refine)
    : equation_(instance.equation), refine_(refine) {
  instance.validate();
  if (refine < 1) throw std::invalid_argument("refine: must be at least 1");
  const long long fine_cells = static_cast<long long>(instance.mesh.n_cells) * refine;
  if (fine_cells - 1 > static_cast<long long>(linalg::kPencilMaxSize)) {
    throw std::invalid_argument("refine: fine mesh with " + std::to_string(fine_cells) +
                                " cells exceeds the exact propagation limit of " +
                                std::to_string(linalg::kPencilMaxSize + 1) + " cells");
  }
  fine_ = std::make_shared<const fem::FemOperators>(
      fem::assemble(Mesh1D(instance.mesh.length, static_cast<int>(fine_cells)), instance.profile));
  eig_ = linalg::pencil_eigs(fine_->stiffness, fine_->mass);

  const std::size_t n = fine_->dofs();
  auto modal = [&](const RVec& nodal) {
    RVec mu(n);
    fine_->mass.multiply<double>(nodal, mu);
    RVec coeff(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = eig_.vector(j);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += v[i] * mu[i];
      coeff[j] = s;
    }
    return coeff;
  };
  modal_position_ = modal(fem::interpolate(fine_->mesh, instance.truth));
  if (equation_ == Equation::wave) {
    modal_velocity_ = modal(fem::interpolate(fine_->mesh, instance.truth_velocity));
  }
}

CVec ExactPropagator::schrodinger_state(double t) const {
  if (equation_ != Equation::schrodinger) {
    throw std::logic_error("schrodinger_state on a wave instance");
  }
  const std::size_t n = fine_->dofs();
  CVec z(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (modal_position_[j] == 0.0) continue;
    const Complex a = std::polar(modal_position_[j], eig_.values[j] * t);
    const auto v = eig_.vector(j);
    for (std::size_t i = 0; i < n; ++i) z[i] += a * v[i];
  }
  return z;
}

WaveState ExactPropagator::wave_state(double t) const {
  if (equation_ != Equation::wave) throw std::logic_error("wave_state on a Schrodinger instance");
  const std::size_t n = fine_->dofs();
  WaveState s{RVec(n, 0.0), RVec(n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) {
    const double omega = std::sqrt(eig_.values[j]);
    const double c = std::cos(omega * t);
    const double sn = std::sin(omega * t);
    const double a = modal_position_[j];
    const double b = modal_velocity_[j];
    const double pos = c * a + sn / omega * b;
    const double vel = -omega * sn * a + c * b;
    const auto v = eig_.vector(j);
    for (std::size_t i = 0; i < n; ++i) {
      s.position[i] += pos * v[i];
      s.velocity[i] += vel * v[i];
    }
  }
  return s;
}

ObservationTrace generate_observation(const ProblemInstance& instance, int refine,
                                      const NoiseSpec& noise) {
  const ExactPropagator exact(instance, refine);
  const auto& fine = exact.fine_ops();
  const std::size_t nf = fine.dofs();
  RVec weight(nf);
  for (std::size_t i = 0; i < nf; ++i) weight[i] = instance.profile(fine.mesh.node(i));

  ObservationTrace trace;
  auto& h = trace.header;
  h.equation = instance.equation;
  h.length = instance.mesh.length;
  h.n_cells = instance.mesh.n_cells;
  h.tau = instance.tau;
  h.dt = instance.dt;
  h.steps = instance.steps;
  h.profile = instance.profile;
  h.refine = refine;
  h.provenance = refine > 1 ? "mesh-refined" : "clean";

  for (int l = 0; l <= instance.steps; ++l) {
    const double t = l * instance.dt;
    if (instance.equation == Equation::schrodinger) {
      CVec z = exact.schrodinger_state(t);
      for (std::size_t i = 0; i < nf; ++i) z[i] *= weight[i];
      trace.complex_samples.push_back(
          fem::restrict_by_injection<Complex>(z, instance.mesh, refine));
    } else {
      RVec v = exact.wave_state(t).velocity;
      for (std::size_t i = 0; i < nf; ++i) v[i] *= weight[i];
      trace.real_samples.push_back(fem::restrict_by_injection<double>(v, instance.mesh, refine));
    }
  }
  if (noise.eps > 0.0) return add_noise(trace, noise);
  return trace;
}

ObservationTrace add_noise(const ObservationTrace& trace, const NoiseSpec& noise) {
  if (noise.eps < 0.0) throw std::invalid_argument("noise eps: must be nonnegative");
  ObservationTrace out = trace;
  if (noise.eps == 0.0) return out;
  std::mt19937_64 rng(noise.seed);
  for (auto& row : out.complex_samples) {
    for (auto& v : row) {
      const double re = noise.eps * uniform_pm1(rng);
      const double im = noise.eps * uniform_pm1(rng);
      v += Complex(re, im);
    }
  }
  for (auto& row : out.real_samples) {
    for (auto& v : row) v += noise.eps * uniform_pm1(rng);
  }
  out.header.noise_eps = noise.eps;
  out.header.noise_seed = noise.seed;
  out.header.provenance = "noisy";
  return out;
}

// ---------------------------------------------------------------------------

std::string trace_header_text(const observers::TraceHeader& h) {
  std::ostringstream os;
  os << "# format_version=" << h.format_version << '\n'
     << "# equation=" << observers::to_string(h.equation) << '\n'
     << "# length=" << fmt17(h.length) << '\n'
     << "# n_cells=" << h.n_cells << '\n'
     << "# tau=" << fmt17(h.tau) << '\n'
     << "# dt=" << fmt17(h.dt) << '\n'
     << "# steps=" << h.steps << '\n';
  if (h.profile.kind() == ObservationProfile::Kind::bump) {
    os << "# profile=bump\n"
       << "# profile_a=" << fmt17(h.profile.a()) << '\n'
       << "# profile_b=" << fmt17(h.profile.b()) << '\n'
       << "# profile_m=" << h.profile.smoothness() << '\n';
  } else {
    os << "# profile=constant\n"
       << "# profile_value=" << fmt17(h.profile.value()) << '\n';
  }
  os << "# refine=" << h.refine << '\n'
     << "# noise_eps=" << fmt17(h.noise_eps) << '\n'
     << "# noise_seed=" << h.noise_seed << '\n'
     << "# provenance=" << h.provenance << '\n';
  return os.str();
}

void write_trace(std::ostream& out, const ObservationTrace& trace) {
  out << trace_header_text(trace.header);
  if (trace.header.equation == Equation::schrodinger) {
    for (const auto& row : trace.complex_samples) write_row(out, row);
  } else {
    for (const auto& row : trace.real_samples) write_row(out, row);
  }
}

void write_trace(const std::string& path, const ObservationTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_trace(out, trace);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

ObservationTrace read_trace(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::vector<RVec> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      if (!kv.emplace(key, line.substr(eq + 1)).second) {
        throw std::runtime_error("trace header: duplicate key '" + key + "' on line " +
                                 std::to_string(line_no));
      }
      continue;
    }
    if (kv.empty()) throw std::runtime_error("trace has data before its header");
    rows.push_back(parse_row(line, line_no));
  }

  ObservationTrace trace;
  auto& h = trace.header;
  h.format_version = static_cast<int>(to_int(kv, "format_version"));
  if (h.format_version != observers::TraceHeader::kFormatVersion) {
    throw std::runtime_error("unsupported trace format_version " +
                             std::to_string(h.format_version));
  }
  if (!kv.count("equation")) throw std::runtime_error("trace header missing 'equation'");
  h.equation = observers::parse_equation(kv.at("equation"));
  h.length = to_double(kv, "length");
  h.n_cells = static_cast<int>(to_int(kv, "n_cells"));
  h.tau = to_double(kv, "tau");
  h.dt = to_double(kv, "dt");
  h.steps = static_cast<int>(to_int(kv, "steps"));
  const std::string profile = kv.count("profile") ? kv.at("profile") : "";
  if (profile == "bump") {
    h.profile = ObservationProfile::bump(to_double(kv, "profile_a"), to_double(kv, "profile_b"),
                                         static_cast<int>(to_int(kv, "profile_m")));
  } else if (profile == "constant") {
    h.profile = ObservationProfile::constant(to_double(kv, "profile_value"));
  } else {
    throw std::runtime_error("trace header: unknown profile '" + profile + "'");
  }
  h.refine = static_cast<int>(to_int(kv, "refine"));
  h.noise_eps = to_double(kv, "noise_eps");
  h.noise_seed = std::stoull(kv.count("noise_seed") ? kv.at("noise_seed") : "0");
  h.provenance = kv.count("provenance") ? kv.at("provenance") : "clean";

  const std::size_t n = static_cast<std::size_t>(h.n_cells - 1);
  if (rows.size() != static_cast<std::size_t>(h.steps) + 1) {
    throw std::runtime_error("trace has " + std::to_string(rows.size()) + " rows, header says " +
                             std::to_string(h.steps + 1));
  }
  for (std::size_t l = 0; l < rows.size(); ++l) {
    const auto& r = rows[l];
    if (h.equation == Equation::schrodinger) {
      if (r.size() != 2 * n) {
        throw std::runtime_error("trace row " + std::to_string(l) + " has " +
                                 std::to_string(r.size()) + " values, expected " +
                                 std::to_string(2 * n));
      }
      CVec c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = Complex(r[2 * i], r[2 * i + 1]);
      trace.complex_samples.push_back(std::move(c));
    } else {
      if (r.size() != n) {
        throw std::runtime_error("trace row " + std::to_string(l) + " has " +
                                 std::to_string(r.size()) + " values, expected " +
                                 std::to_string(n));
      }
      trace.real_samples.push_back(r);
    }
  }
  return trace;
}

ObservationTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  return read_trace(in);
}

void write_estimate(const std::string& path, const observers::TraceHeader& header,
                    const CVec& estimate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "# kind=estimate\n" << trace_header_text(header);
  write_row(out, estimate);
}

void write_estimate(const std::string& path, const observers::TraceHeader& header,
                    const WaveState& estimate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "# kind=estimate\n" << trace_header_text(header);
  write_row(out, estimate.position);
  write_row(out, estimate.velocity);
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016" PRIx64, hash);
  return out;
}

}  // namespace bfo::models
