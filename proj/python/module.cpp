// Python bindings for the core pipelines.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ruinsim/cli.hpp"
#include "ruinsim/config.hpp"
#include "ruinsim/estimator.hpp"
#include "ruinsim/limits.hpp"
#include "ruinsim/lyapunov.hpp"

namespace py = pybind11;
using namespace ruinsim;

namespace {

py::dict estimate_dict(const RuinEstimate& e) {
  py::dict d;
  d["n_paths"] = e.n_paths;
  d["n_hits"] = e.n_hits;
  d["n_overflow"] = e.n_overflow;
  d["p_hat"] = e.p_hat;
  d["p_hat_star"] = e.p_hat_star;
  d["var_hat"] = e.var_hat;
  d["rel_err"] = e.rel_err;
  d["m2_ratio"] = e.m2_ratio;
  d["m2_ratio_se"] = e.m2_ratio_se;
  d["tv_bound"] = e.tv_bound;
  d["overflow_frac"] = e.overflow_frac;
  return d;
}

IncrementModel make_model(double alpha, double xm, const std::vector<std::pair<Vec, double>>& atoms,
                          double body_radius) {
  std::vector<SpectralAtom> a;
  for (const auto& [dir, w] : atoms) a.push_back({dir, w});
  return IncrementModel(alpha, xm, SpectralMeasure(std::move(a)), body_radius);
}

}  // namespace

PYBIND11_MODULE(ruinsim, m) {
  m.doc() = "Importance sampling for heavy-tailed random walks conditioned on ruin";

  // Translators are tried newest first: register the base class first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);

  py::class_<IncrementModel>(m, "IncrementModel")
      .def(py::init(&make_model), py::arg("alpha"), py::arg("xm"), py::arg("atoms"),
           py::arg("body_radius") = 0.0)
      .def_property_readonly("alpha", &IncrementModel::alpha)
      .def_property_readonly("dim", &IncrementModel::dim)
      .def_property_readonly("shift", &IncrementModel::shift)
      .def("sample", [](const IncrementModel& model, std::uint64_t seed, std::size_t n) {
        Rng rng(seed);
        std::vector<Vec> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(model.sample(rng));
        return out;
      }, py::arg("seed"), py::arg("n"));

  py::class_<TargetSpec>(m, "TargetSpec")
      .def_readonly("vstar", &TargetSpec::vstar)
      .def_readonly("astar", &TargetSpec::astar)
      .def_readonly("beta", &TargetSpec::beta);
  m.def("normalize_target", &normalize_target, py::arg("directions"), py::arg("offsets"),
        py::arg("delta") = 0.05, py::arg("beta") = 0.0, py::arg("gamma") = 20.0);

  py::class_<MixtureKernel>(m, "MixtureKernel")
      .def(py::init([](const IncrementModel& model, const TargetSpec& spec, double b, double theta,
                       double a, double delta2) {
             KernelParams p;
             p.theta = theta;
             p.a = a;
             p.delta2 = delta2;
             return MixtureKernel(model, spec, b, p);
           }),
           py::arg("model"), py::arg("spec"), py::arg("b"), py::arg("theta") = 0.99,
           py::arg("a") = 0.99, py::arg("delta2") = 0.1)
      .def_property_readonly("b", &MixtureKernel::b)
      .def("v_b", [](const MixtureKernel& k, const Vec& s) { return k.v_b(s); })
      .def("p_b", [](const MixtureKernel& k, const Vec& s) { return k.p_b(s); });

  m.def("estimate_ruin", [](const MixtureKernel& k, std::size_t n, std::uint64_t seed,
                            unsigned workers) {
    py::gil_scoped_release release;
    const auto e = estimate_ruin(k, n, seed, workers);
    py::gil_scoped_acquire acquire;
    return estimate_dict(e);
  }, py::arg("kernel"), py::arg("n_paths"), py::arg("seed"), py::arg("workers") = 1);

  m.def("crude_estimate", [](const MixtureKernel& k, std::size_t n, std::uint64_t seed,
                             unsigned workers) {
    py::gil_scoped_release release;
    const auto e = crude_estimate(k, n, seed, workers);
    py::gil_scoped_acquire acquire;
    return estimate_dict(e);
  }, py::arg("kernel"), py::arg("n_paths"), py::arg("seed"), py::arg("workers") = 1);

  m.def("zstar_survival", [](const MixtureKernel& k, const std::vector<double>& t) {
    const HazardTable h(k.model(), k.star());
    std::vector<double> out;
    for (double x : t) out.push_back(h.survival_at(x));
    return out;
  }, py::arg("kernel"), py::arg("t"));

  m.def("kappa_polar", [](const IncrementModel& model, const std::vector<Vec>& normals,
                          const Vec& offsets, double t, const Vec& z) {
    return kappa_polar(model, normals, offsets, t, z);
  }, py::arg("model"), py::arg("normals"), py::arg("offsets"), py::arg("t"), py::arg("z"));

  m.def("tuned_constants", [](double eps) {
    const auto c = tuned_constants(eps);
    return py::make_tuple(c.theta, c.c1);
  }, py::arg("epsilon"));
  m.def("d_mollify", &d_mollify, py::arg("delta0"), py::arg("x"));

  m.def("effective_config", [](const std::string& text) {
    return effective_config(parse_config(text)).dump();
  }, py::arg("config_text"), "Validated configuration with defaults filled, as JSON text.");

  m.def("run", [](const std::string& subcommand, const std::string& config_text,
                  const std::string& out_dir) {
    const RunConfig cfg = parse_config(config_text);
    py::gil_scoped_release release;
    return run(subcommand, cfg, out_dir);
  }, py::arg("subcommand"), py::arg("config_text"), py::arg("out_dir"),
        "Runs a subcommand; returns 0 (pass) or 2 (statistical failure).");
  m.attr("subcommands") = subcommands();
}
