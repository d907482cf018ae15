#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "srb/cli.hpp"
#include "srb/errors.hpp"
#include "srb/experiments.hpp"
#include "srb/induced.hpp"
#include "srb/maps.hpp"
#include "srb/symbolic.hpp"
#include "srb/transfer.hpp"

namespace py = pybind11;
using namespace srb;

namespace {

py::array_t<double> density_array(const GridDensity& d) {
  py::array_t<double> a({d.grid().n_theta, d.grid().n_x});
  auto* out = a.mutable_data();
  for (std::size_t i = 0; i < d.grid().cells(); ++i) out[i] = d[i];
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Numerics for Viana skew-product maps";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainEscape>(m, "DomainEscape", PyExc_RuntimeError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::class_<Perturbation>(m, "Perturbation")
      .def(py::init([](double amplitude, int frequency, double phase) {
             return Perturbation{amplitude, frequency, phase};
           }),
           py::arg("amplitude"), py::arg("frequency") = 1, py::arg("phase") = 0.0)
      .def_readonly("amplitude", &Perturbation::amplitude)
      .def_readonly("frequency", &Perturbation::frequency)
      .def_readonly("phase", &Perturbation::phase);

  py::class_<DomainInterval>(m, "DomainInterval")
      .def(py::init([](double lo, double hi) { return DomainInterval{lo, hi}; }))
      .def_readonly("lo", &DomainInterval::lo)
      .def_readonly("hi", &DomainInterval::hi)
      .def("__repr__", [](const DomainInterval& d) {
        std::ostringstream os;
        os << "DomainInterval(" << d.lo << ", " << d.hi << ")";
        return os.str();
      });

  m.def("invariant_domain", &invariant_domain, py::arg("a_min"), py::arg("a_max"), py::arg("margin") = 0.01);

  py::class_<SkewMapParams>(m, "SkewMapParams")
      .def_static("viana", &SkewMapParams::viana, py::arg("degree") = 16, py::arg("a0") = 1.9,
                  py::arg("alpha") = 0.01, py::arg("perturb") = std::vector<Perturbation>{},
                  py::arg("domain") = std::nullopt)
      .def_static("doubling_product", &SkewMapParams::doubling_product, py::arg("alpha") = 0.0)
      .def_static("linear", &SkewMapParams::linear, py::arg("alpha") = 0.0)
      .def_property_readonly("variant", [](const SkewMapParams& p) { return std::string(to_string(p.variant())); })
      .def_property_readonly("degree", &SkewMapParams::degree)
      .def_property_readonly("a0", &SkewMapParams::a0)
      .def_property_readonly("alpha", &SkewMapParams::alpha)
      .def_property_readonly("domain", &SkewMapParams::domain)
      .def("a", &SkewMapParams::a)
      .def("with_perturbation", &SkewMapParams::with_perturbation, py::arg("p"), py::arg("domain") = std::nullopt);

  m.def(
      "eval",
      [](const SkewMapParams& p, double theta, double x) {
        const auto q = eval(p, {theta, x});
        return py::make_tuple(q.theta, q.x);
      },
      py::arg("params"), py::arg("theta"), py::arg("x"));
  m.def(
      "orbit",
      [](const SkewMapParams& p, double theta, double x, int n, std::uint64_t seed) {
        const auto t = orbit(p, {theta, x}, n, seed);
        py::array_t<double> pts({static_cast<py::ssize_t>(t.size()), py::ssize_t{2}});
        auto* out = pts.mutable_data();
        for (std::size_t i = 0; i < t.size(); ++i) {
          out[2 * i] = t.points[i].theta;
          out[2 * i + 1] = t.points[i].x;
        }
        return py::make_tuple(pts, t.rcodes);
      },
      py::arg("params"), py::arg("theta"), py::arg("x"), py::arg("n"), py::arg("seed") = 0,
      "Returns (points[n+1, 2], return codes).");

  m.def("return_code", &return_code, py::arg("x"), py::arg("alpha"));
  m.def("r_cap", &r_cap, py::arg("alpha"));

  py::class_<HyperbolicParams>(m, "HyperbolicParams")
      .def(py::init<>())
      .def_readwrite("c", &HyperbolicParams::c)
      .def_readwrite("eps", &HyperbolicParams::eps)
      .def_readwrite("eta", &HyperbolicParams::eta)
      .def_readwrite("p_start", &HyperbolicParams::p_start)
      .def("validate", &HyperbolicParams::validate);

  m.def(
      "is_hyperbolic_time",
      [](const std::vector<int>& r, const HyperbolicParams& hp, double alpha, int n) {
        return is_hyperbolic_time(r, hp, alpha, n);
      },
      py::arg("rcodes"), py::arg("hp"), py::arg("alpha"), py::arg("n"));
  m.def(
      "first_hyperbolic_return",
      [](const SkewMapParams& p, double theta, double x, const HyperbolicParams& hp, int max_steps,
         std::uint64_t seed) { return first_hyperbolic_return(p, {theta, x}, hp, max_steps, seed); },
      py::arg("params"), py::arg("theta"), py::arg("x"), py::arg("hp"), py::arg("max_steps"), py::arg("seed") = 0);

  m.def(
      "invariant_density",
      [](const SkewMapParams& p, int n_theta, int n_x, int subsamples, std::uint64_t seed, double tol) {
        const auto res = invariant_density(build_ulam(p, Grid::for_map(p, n_theta, n_x), subsamples, seed), tol);
        return py::make_tuple(density_array(res.density), res.residual);
      },
      py::arg("params"), py::arg("n_theta"), py::arg("n_x"), py::arg("subsamples") = 64, py::arg("seed") = 0,
      py::arg("tol") = 1e-10, "Ulam invariant density as an (n_theta, n_x) array, plus its residual.");
  m.def(
      "birkhoff_density",
      [](const SkewMapParams& p, int n_theta, int n_x, int orbits, int length, int burn_in, std::uint64_t seed) {
        return density_array(birkhoff_density(p, orbits, length, burn_in, Grid::for_map(p, n_theta, n_x), seed).density);
      },
      py::arg("params"), py::arg("n_theta"), py::arg("n_x"), py::arg("orbits"), py::arg("length"),
      py::arg("burn_in"), py::arg("seed"));

  m.def(
      "lyapunov_vertical",
      [](const SkewMapParams& p, int samples, int n, std::uint64_t seed) {
        const auto s = lyapunov_vertical(p, samples, n, seed);
        return py::dict(py::arg("median") = s.median, py::arg("mean") = s.mean,
                        py::arg("fraction_positive") = s.fraction_positive, py::arg("exponents") = s.exponents);
      },
      py::arg("params"), py::arg("samples"), py::arg("n"), py::arg("seed"));
  m.def(
      "recovery_depth",
      [](const SkewMapParams& p, double theta, double x, double eta, int cap, std::uint64_t seed) {
        return recovery_depth(p, {theta, x}, eta, cap, seed);
      },
      py::arg("params"), py::arg("theta"), py::arg("x"), py::arg("eta") = 0.1, py::arg("cap") = 1000,
      py::arg("seed") = 0);
  m.def("spearman", [](const std::vector<double>& a, const std::vector<double>& b) { return spearman(a, b); });

  m.def(
      "run_experiment",
      [](const std::string& kind, const std::string& config_json, const std::string& out) {
        cli::ExperimentConfig cfg;
        cfg.kind = kind;
        cli::apply_json(cfg, config_json);
        cfg.out = out;
        std::ostringstream err;
        const auto r = cli::run(cfg, err);
        return py::dict(py::arg("exit_code") = r.exit_code, py::arg("directory") = r.directory,
                        py::arg("summary") = r.summary, py::arg("error") = err.str());
      },
      py::arg("kind"), py::arg("config_json") = "{}", py::arg("out") = "out",
      "Runs one experiment like `srb_lab run <kind>` and writes its artifacts under `out`.");
}
