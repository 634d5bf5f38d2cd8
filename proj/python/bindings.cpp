#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tocflow/experiments.hpp"
#include "tocflow/oracle.hpp"

namespace py = pybind11;
using namespace tocflow;

namespace {

Gaussian1DModel make_model(double mu, double sigma, double lambda0, double gamma, double eps_s) {
  Gaussian1DModel m;
  m.mu = mu;
  m.sigma = sigma;
  m.schedule = {lambda0, gamma};
  m.eps_s = eps_s;
  return m;
}

Scheme scheme_from(const std::string& s) {
  if (s == "exact") return Scheme::Exact;
  if (s == "gd") return Scheme::Gd;
  if (s == "tocflow") return Scheme::Tocflow;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_tocflow, m) {
  m.doc() = "tocflow core bindings";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "gamma_lambda",
      [](double mu, double sigma, double lambda0, double gamma, double eps_s) {
        return gamma_lambda(make_model(mu, sigma, lambda0, gamma, eps_s));
      },
      py::arg("mu") = 2.0, py::arg("sigma") = 1.0, py::arg("lambda0") = 1.0, py::arg("gamma") = 0.0,
      py::arg("eps_s") = 0.005);
  m.def(
      "eta_lambda",
      [](double mu, double sigma, double lambda0, double gamma, double eps_s) {
        return eta_lambda(make_model(mu, sigma, lambda0, gamma, eps_s));
      },
      py::arg("mu") = 2.0, py::arg("sigma") = 1.0, py::arg("lambda0") = 1.0, py::arg("gamma") = 0.0,
      py::arg("eps_s") = 0.005);
  m.def(
      "terminal_moments",
      [](const std::string& scheme, double mu, double sigma, double lambda0, double gamma, double eps_s) {
        const auto model = make_model(mu, sigma, lambda0, gamma, eps_s);
        const Scheme s = scheme_from(scheme);
        const auto r = s == Scheme::Exact ? exact_moments(model) : scheme_moments(model, s);
        return std::make_pair(r.mean, r.std);
      },
      "(mean, std) of the terminal law for 'exact', 'gd' or 'tocflow'", py::arg("scheme"), py::arg("mu") = 2.0,
      py::arg("sigma") = 1.0, py::arg("lambda0") = 1.0, py::arg("gamma") = 0.0, py::arg("eps_s") = 0.005);
  m.def(
      "fig1_curve",
      [](double sigma, double mu, const std::vector<double>& lambdas) {
        std::vector<std::tuple<double, double, double, double>> out;
        for (const auto& r : fig1_curve(sigma, mu, lambdas)) out.emplace_back(r.lambda, r.exact, r.gd, r.toc);
        return out;
      },
      py::arg("sigma"), py::arg("mu"), py::arg("lambdas"));

  m.def(
      "energy_spectrum",
      [](const Vec& omega, int n, int kmin, int kmax) {
        return energy_spectrum(SpectrumConstraint(n, kmin, kmax), omega);
      },
      py::arg("omega"), py::arg("n"), py::arg("kmin") = 2, py::arg("kmax") = 9);
  m.def(
      "spectrum_residual",
      [](const Vec& omega, int n, int kmin, int kmax) {
        return spectrum_residual(SpectrumConstraint(n, kmin, kmax), omega);
      },
      py::arg("omega"), py::arg("n"), py::arg("kmin") = 2, py::arg("kmax") = 9);

  // Configs and summaries cross the boundary as JSON text; the Python side decodes them.
  m.def("default_config", [](const std::string& task) { return default_config(task).dump(); });
  m.def(
      "run_experiment",
      [](const std::string& task, const std::string& config) {
        json cfg = merge_config(task, config.empty() ? json::object() : json::parse(config));
        TaskResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(task, cfg);
        }
        std::vector<std::tuple<std::string, double, double, bool>> checks;
        for (const auto& c : r.checks) checks.emplace_back(c.name, c.value, c.threshold, c.pass);
        return std::make_pair(r.summary.dump(), checks);
      },
      py::arg("task"), py::arg("config") = "");
}
