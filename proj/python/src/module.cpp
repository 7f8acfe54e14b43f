#include <algorithm>

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bfo/errors.hpp"
#include "bfo/harness.hpp"
#include "bfo/models.hpp"
#include "bfo/observers.hpp"

namespace py = pybind11;
using namespace bfo;
using observers::Equation;

namespace {

template <class T>
py::array_t<T> to_array(const std::vector<std::vector<T>>& rows) {
  const std::size_t n = rows.empty() ? 0 : rows.front().size();
  py::array_t<T> out({rows.size(), n});
  auto view = out.template mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) view(i, j) = rows[i][j];
  }
  return out;
}

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::object samples(const observers::ObservationTrace& t) {
  if (t.header.equation == Equation::schrodinger) return to_array(t.complex_samples);
  return to_array(t.real_samples);
}

std::shared_ptr<const fem::FemOperators> ops_for(const models::ProblemInstance& inst) {
  return std::make_shared<const fem::FemOperators>(fem::assemble(inst.mesh, inst.profile));
}

observers::EtaEstimate eta_for(const models::ProblemInstance& inst, double tol, int max_iter,
                               std::uint64_t seed) {
  inst.validate();
  const auto ops = ops_for(inst);
  if (inst.equation == Equation::schrodinger) {
    return observers::estimate_eta(observers::SchrodingerObserver(ops, inst.dt, inst.steps), tol,
                                   max_iter, seed);
  }
  return observers::estimate_eta(observers::WaveObserver(ops, inst.dt, inst.steps), tol, max_iter,
                                 seed);
}

py::dict eta_dict(const observers::EtaEstimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["converged"] = e.converged;
  d["iterations"] = e.iterations;
  d["kind"] = observers::to_string(e.kind);
  return d;
}

/// Reconstructs from `trace`; N from eta (auto) unless `terms` is given.
py::dict reconstruct(const models::ProblemInstance& inst, const observers::ObservationTrace& trace,
                     std::optional<int> terms, std::optional<double> eta, double theta) {
  inst.validate();
  const auto ops = ops_for(inst);
  py::dict d;
  auto run = [&](const auto& sys) {
    observers::NeumannPolicy policy;
    if (terms) {
      policy = observers::NeumannPolicy::fixed(*terms);
    } else {
      const double value =
          eta ? *eta : observers::estimate_eta(sys).value;
      policy = observers::NeumannPolicy::automatic_from(value, theta);
    }
    auto r = observers::neumann_reconstruct(sys, trace, policy);
    d["n_used"] = r.n_used;
    d["eta_hat"] = r.eta_hat;
    d["increment_norms"] = r.increment_norms;
    d["time_steps"] = r.time_steps;
    d["warnings"] = r.warnings;
    return r;
  };
  if (inst.equation == Equation::schrodinger) {
    const auto r = run(observers::SchrodingerObserver(ops, inst.dt, inst.steps));
    d["estimate"] = to_array(r.estimate);
    d["error_x"] = harness::theorem_error_exact(inst.mesh, inst.truth, r.estimate);
  } else {
    const auto r = run(observers::WaveObserver(ops, inst.dt, inst.steps));
    d["position"] = to_array(r.estimate.position);
    d["velocity"] = to_array(r.estimate.velocity);
    d["error_x"] =
        harness::theorem_error_exact(inst.mesh, inst.truth, inst.truth_velocity, r.estimate);
  }
  return d;
}

py::dict row_dict(const harness::SweepRow& r) {
  py::dict d;
  d["equation"] = observers::to_string(r.equation);
  d["n_cells"] = r.n_cells;
  d["h"] = r.h;
  d["dt"] = r.dt;
  d["n_used"] = r.n_used;
  d["eta_hat"] = r.eta_hat;
  d["noise_eps"] = r.noise_eps;
  d["error_x"] = r.error_x;
  d["ok"] = r.ok;
  d["failure"] = r.failure;
  d["warnings"] = r.warnings;
  return d;
}

harness::SweepRow row_from(const py::dict& d) {
  harness::SweepRow r;
  r.h = d["h"].cast<double>();
  r.dt = d["dt"].cast<double>();
  r.error_x = d["error_x"].cast<double>();
  if (d.contains("ok")) r.ok = d["ok"].cast<bool>();
  if (d.contains("n_cells")) r.n_cells = d["n_cells"].cast<int>();
  return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Back-and-forth observer reconstruction of initial states";

  py::register_exception<NotContractive>(m, "NotContractive", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);

  py::enum_<Equation>(m, "Equation")
      .value("schrodinger", Equation::schrodinger)
      .value("wave", Equation::wave);

  py::class_<fem::ObservationProfile>(m, "ObservationProfile")
      .def_static("bump", &fem::ObservationProfile::bump, py::arg("a"), py::arg("b"),
                  py::arg("smoothness") = 2)
      .def_static("constant", &fem::ObservationProfile::constant, py::arg("value"))
      .def_static("standard", &fem::ObservationProfile::standard, py::arg("length") = 1.0)
      .def("__call__", &fem::ObservationProfile::operator())
      .def("__repr__", &fem::ObservationProfile::describe);

  py::class_<fem::FieldSpec>(m, "FieldSpec")
      .def_static("sine_sum", &fem::FieldSpec::sine_sum, py::arg("coefficients"),
                  py::arg("length") = 1.0)
      .def_static("poly_bump", &fem::FieldSpec::poly_bump, py::arg("amplitude"),
                  py::arg("length") = 1.0)
      .def("__call__", &fem::FieldSpec::value)
      .def("derivative", &fem::FieldSpec::derivative)
      .def("__repr__", &fem::FieldSpec::describe);

  py::class_<models::ProblemInstance>(m, "ProblemInstance")
      .def_property_readonly("equation", [](const models::ProblemInstance& p) { return p.equation; })
      .def_property_readonly("n_cells", [](const models::ProblemInstance& p) { return p.mesh.n_cells; })
      .def_property_readonly("h", [](const models::ProblemInstance& p) { return p.mesh.h(); })
      .def_property_readonly("length", [](const models::ProblemInstance& p) { return p.mesh.length; })
      .def_readonly("tau", &models::ProblemInstance::tau)
      .def_readonly("dt", &models::ProblemInstance::dt)
      .def_readonly("steps", &models::ProblemInstance::steps)
      .def_readwrite("profile", &models::ProblemInstance::profile)
      .def_readwrite("truth", &models::ProblemInstance::truth)
      .def_readwrite("truth_velocity", &models::ProblemInstance::truth_velocity)
      .def("nodes", [](const models::ProblemInstance& p) {
        std::vector<double> x(p.mesh.dofs());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = p.mesh.node(i);
        return to_array(x);
      })
      .def("validate", &models::ProblemInstance::validate);

  m.def("default_instance", &models::default_instance, py::arg("equation"), py::arg("n_cells"),
        py::arg("kappa") = 1.0);

  py::class_<observers::ObservationTrace>(m, "Trace")
      .def_property_readonly("equation",
                             [](const observers::ObservationTrace& t) { return t.header.equation; })
      .def_property_readonly("n_cells",
                             [](const observers::ObservationTrace& t) { return t.header.n_cells; })
      .def_property_readonly("dt", [](const observers::ObservationTrace& t) { return t.header.dt; })
      .def_property_readonly("steps",
                             [](const observers::ObservationTrace& t) { return t.header.steps; })
      .def_property_readonly("refine",
                             [](const observers::ObservationTrace& t) { return t.header.refine; })
      .def_property_readonly("noise_eps",
                             [](const observers::ObservationTrace& t) { return t.header.noise_eps; })
      .def_property_readonly(
          "provenance", [](const observers::ObservationTrace& t) { return t.header.provenance; })
      .def_property_readonly("samples", &samples)
      .def("__len__", &observers::ObservationTrace::sample_count);

  m.def(
      "generate_observation",
      [](const models::ProblemInstance& inst, int refine, double noise_eps,
         std::uint64_t noise_seed) {
        return models::generate_observation(inst, refine, {noise_eps, noise_seed});
      },
      py::arg("instance"), py::arg("refine") = 2, py::arg("noise_eps") = 0.0,
      py::arg("noise_seed") = 0);
  m.def(
      "add_noise",
      [](const observers::ObservationTrace& t, double eps, std::uint64_t seed) {
        return models::add_noise(t, {eps, seed});
      },
      py::arg("trace"), py::arg("eps"), py::arg("seed"));
  m.def("write_trace", py::overload_cast<const std::string&, const observers::ObservationTrace&>(
                           &models::write_trace),
        py::arg("path"), py::arg("trace"));
  m.def("read_trace", py::overload_cast<const std::string&>(&models::read_trace), py::arg("path"));
  m.def("file_checksum", &models::file_checksum, py::arg("path"));

  m.def(
      "estimate_eta",
      [](const models::ProblemInstance& inst, double tol, int max_iter, std::uint64_t seed) {
        return eta_dict(eta_for(inst, tol, max_iter, seed));
      },
      py::arg("instance"), py::arg("tol") = 1e-10, py::arg("max_iter") = 2000,
      py::arg("seed") = 20240917);

  m.def("reconstruct", &reconstruct, py::arg("instance"), py::arg("trace"),
        py::arg("terms") = py::none(), py::arg("eta") = py::none(), py::arg("theta") = 1.0);

  m.def(
      "choose_truncation",
      [](const std::string& mode, double h, double dt, double theta, double eta) {
        if (mode != "full" && mode != "semi") throw py::value_error("mode must be 'full' or 'semi'");
        return observers::choose_truncation(
            mode == "full" ? observers::TruncationMode::full : observers::TruncationMode::semi, h,
            dt, theta, eta);
      },
      py::arg("mode"), py::arg("h"), py::arg("dt"), py::arg("theta"), py::arg("eta"));

  m.def(
      "run_sweep",
      [](Equation eq, int base_cells, int levels, double kappa, int refine,
         std::vector<double> noise_eps, std::optional<int> terms, int workers) {
        auto plan = harness::SweepPlan::defaults(eq);
        plan.base_cells = base_cells;
        plan.levels = levels;
        plan.kappa = kappa;
        plan.refine = refine;
        plan.noise_eps = std::move(noise_eps);
        if (terms) {
          plan.auto_terms = false;
          plan.fixed_terms = *terms;
        }
        plan.workers = workers;
        plan.validate();
        std::vector<harness::SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = harness::run_sweep(plan);
        }
        py::list out;
        for (const auto& r : rows) out.append(row_dict(r));
        return out;
      },
      py::arg("equation"), py::arg("base_cells") = 32, py::arg("levels") = 4,
      py::arg("kappa") = 1.0, py::arg("refine") = 2,
      py::arg("noise_eps") = std::vector<double>{0.0}, py::arg("terms") = py::none(),
      py::arg("workers") = 0);

  m.def(
      "fit_rate",
      [](const py::list& rows, const std::string& model, double theta) {
        std::vector<harness::SweepRow> rs;
        for (const auto& r : rows) rs.push_back(row_from(r.cast<py::dict>()));
        const auto f = harness::fit_rate(rs, harness::parse_fit_model(model), theta);
        py::dict d;
        d["model"] = harness::to_string(f.model);
        d["slope"] = f.slope;
        d["intercept"] = f.intercept;
        d["max_residual"] = f.max_residual;
        d["dropped_coarsest"] = f.dropped_coarsest;
        d["points"] = f.points;
        return d;
      },
      py::arg("rows"), py::arg("model") = "power-log2", py::arg("theta") = 1.0);
}
