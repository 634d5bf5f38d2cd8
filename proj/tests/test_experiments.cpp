#include <cmath>

#include "doctest.h"
#include "tocflow/experiments.hpp"

using namespace tocflow;

namespace {

double check_value(const TaskResult& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return c.value;
  FAIL("missing check " << name);
  return 0.0;
}

double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  auto mean_dist = [](const std::vector<Vec>& p, const std::vector<Vec>& q, bool same) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < q.size(); ++j) {
        if (same && i == j) continue;
        s += (p[i] - q[j]).norm();
        ++n;
      }
    return s / n;
  };
  return 2 * mean_dist(a, b, false) - mean_dist(a, a, true) - mean_dist(b, b, true);
}

}  // namespace

TEST_CASE("GP mixture field construction") {
  GPTrajectorySpec two;
  two.n_x = 2;
  const auto f = gen_gp_mixture_field(two);
  REQUIRE(f.components().size() == 2);
  CHECK(f.components()[0].mean == (Vec(2) << -5, 5).finished());
  CHECK(f.components()[1].mean == (Vec(2) << 5, -5).finished());
  CHECK(f.components()[0].weight == 0.5);
  const Mat k = gp_kernel(GPTrajectorySpec{});
  for (int i = 0; i < k.rows(); ++i) CHECK(k(i, i) == doctest::Approx(0.4 + 1e-8).epsilon(1e-15));
  CHECK(k(0, 1) == doctest::Approx(0.4 * std::exp(-std::pow(1.0 / 63, 2) / (2 * 0.01))).epsilon(1e-12));
  GPTrajectorySpec bad;
  bad.jitter = -1.0;
  CHECK_THROWS_AS(gen_gp_mixture_field(bad), KernelNotPSD);
}

TEST_CASE("vanilla sampling of the GP mixture field reproduces its law") {
  GPTrajectorySpec spec;
  spec.n_x = 8;
  const auto f = gen_gp_mixture_field(spec);
  const CoordinateEquality dummy(spec.n_x, {0}, Vec::Zero(1));
  SamplerConfig cfg;
  cfg.steps = 200;
  cfg.guidance.method = Method::Vanilla;
  cfg.n_samples = 1000;
  cfg.keep_states = true;
  const RunReport rep = sample_batch(f, dummy, cfg, 3);
  RngStream rng(61, 0);
  std::vector<Vec> data;
  for (int i = 0; i < 1000; ++i) data.push_back(f.sample(rng));
  for (int c = 0; c < spec.n_x; ++c) {
    const double x = double(c) / (spec.n_x - 1);
    const double sd = std::sqrt(0.4 + std::pow(10 * x - 5, 2));
    double m = 0.0, v = 0.0;
    for (const auto& s : rep.states) m += s[c] / 1000;
    for (const auto& s : rep.states) v += (s[c] - m) * (s[c] - m) / 999;
    CHECK(std::abs(m) <= 4 * sd / std::sqrt(1000.0));
    CHECK(std::sqrt(v) == doctest::Approx(sd).epsilon(0.1));
  }
  CHECK(energy_distance(rep.states, data) <= 0.05);
}

TEST_CASE("corridor generation") {
  GPTrajectorySpec spec;
  RngStream a(5, 0), b(5, 0);
  const auto c1 = gen_corridors(spec, a), c2 = gen_corridors(spec, b);
  REQUIRE(c1.spans().size() == 4);
  std::vector<int> used(spec.n_x, 0);
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& sp = c1.spans()[s];
    CHECK(sp.index == c2.spans()[s].index);
    CHECK(sp.lower == c2.spans()[s].lower);
    const double w = sp.upper - sp.lower;
    CHECK(w >= 0.12 * 12 - 1e-12);
    CHECK(w <= 0.25 * 12 + 1e-12);
    CHECK(sp.lower >= -6.0);
    CHECK(sp.upper <= 6.0);
    for (std::size_t i = 0; i < sp.index.size(); ++i) {
      ++used[sp.index[i]];
      if (i) CHECK(sp.index[i] == sp.index[i - 1] + 1);
    }
  }
  for (int u : used) CHECK(u <= 1);
}

TEST_CASE("kink metric") {
  CHECK(kink_metric((Vec(4) << 1, 2, 3, 4).finished()) == 0.0);
  CHECK(kink_metric((Vec(4) << 0, 0, 1, 1).finished()) == 1.0);
  CHECK(kink_metric((Vec(3) << 0, 3, 0).finished()) == 6.0);
}

TEST_CASE("darcy generator") {
  DarcyGenSpec spec;
  spec.n = 8;
  spec.modes = 12;
  const KLBasis basis = darcy_kl_basis(spec);
  CHECK((basis.phi.transpose() * basis.phi - Mat::Identity(12, 12)).norm() <= 1e-10);
  for (int i = 1; i < 12; ++i) CHECK(basis.sqrt_lambda[i] <= basis.sqrt_lambda[i - 1]);
  const DarcyConstraint c(spec.n);

  // z = 0 gives K = 1, for which the discrete system is consistent.
  bool ok = false;
  const Vec flat = darcy_state_from_z(spec, basis, c, Vec::Zero(12), &ok);
  CHECK(ok);
  CHECK(flat.head(64).norm() == 0.0);
  CHECK(c.residual(flat).norm() / 8.0 <= 1e-6);

  RngStream rng(62, 0);
  const auto pairs = gen_darcy_pairs(spec, rng, 3);
  REQUIRE(pairs.size() == 3);
  for (const auto& s : pairs) {
    CHECK(std::abs(s.tail(64).mean()) <= 1e-12);
    // Least-squares optimality of the pressure for the sampled K.
    const Vec k = s.head(64).array().exp().matrix();
    Vec rhs = Vec::Zero(64);
    for (int q = 0; q < 64; ++q)
      if (!c.is_boundary(q / 8, q % 8)) rhs[q] = c.source()[q];
    const Vec grad = c.pressure_operator_t(k, c.pressure_operator(k, s.tail(64)) - rhs);
    CHECK(grad.norm() <= 1e-8 * c.pressure_operator_t(k, rhs).norm());
  }
  RngStream again(62, 0);
  CHECK(gen_darcy_pairs(spec, again, 3)[2] == pairs[2]);
}

TEST_CASE("spectrum generator") {
  RngStream rng(63, 0);
  const SpectrumGenSpec kol{64, 5.0 / 3.0, 64.0};
  const Vec w = gen_spectrum_field(kol, rng);
  const SpectrumConstraint c(64);
  const Vec e = c.energy_spectrum(w);
  for (int k = 2; k <= 16; ++k) CHECK(e[k] == doctest::Approx(64.0 * std::pow(k, -5.0 / 3.0)).epsilon(0.02));
  CHECK(spectrum_residual(c, w) <= 1e-3);
  const Vec w2 = gen_spectrum_field({64, 2.0, 64.0}, rng);
  CHECK(spectrum_residual(c, w2) == doctest::Approx(0.0248).epsilon(0.1));
  CHECK_THROWS_AS(gen_spectrum_field({48, 2.0, 1.0}, rng), ShapeError);
}

TEST_CASE("gaussian reference fit") {
  const Vec x = (Vec(3) << 1, 2, 3).finished();
  const auto same = fit_gaussian_reference({x, x, x});
  CHECK((same.components()[0].mean - x).norm() <= 1e-14);
  CHECK((same.covariance(0) - 1e-6 * Mat::Identity(3, 3)).norm() <= 1e-15);

  RngStream rng(64, 0);
  Mat l(2, 2);
  l << 1.0, 0.0, 0.6, 0.5;
  const Vec m = (Vec(2) << -1.0, 3.0).finished();
  std::vector<Vec> xs;
  for (int i = 0; i < 10000; ++i) xs.push_back(gauss_sample(rng, m, l));
  const auto fit = fit_gaussian_reference(xs);
  const Mat s = l * l.transpose();
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(fit.components()[0].mean[i] - m[i]) <= 3 * std::sqrt(s(i, i) / 10000));
  CHECK((fit.covariance(0) - s).norm() <= 0.05);
  CHECK_THROWS(fit_gaussian_reference({x}));
}

TEST_CASE("configs merge over defaults and reject bad input") {
  for (const char* t : {"gaussian", "fig1", "proximal_check", "trajectory", "darcy", "spectrum", "fm",
                        "gradcheck", "gen-data"})
    CHECK(merge_config(t, json()) == default_config(t));
  CHECK_THROWS_AS(default_config("nope"), ConfigError);
  CHECK_THROWS_AS(merge_config("fig1", json{{"lambda_mn", 1.0}}), ConfigError);
  CHECK_THROWS_AS(merge_config("fig1", json{{"count", "many"}}), ConfigError);
  const json m = merge_config("trajectory", json{{"guidance", {{"k", 8}}}});
  CHECK(m["guidance"]["k"] == 8);
  CHECK(m["guidance"]["lambda0"] == default_config("trajectory")["guidance"]["lambda0"]);

  const SamplerConfig s = sampler_from_json(m);
  CHECK(s.guidance.k == 8);
  CHECK(s.n_samples == 256);
  CHECK_FALSE(s.scale_control_by_dt);
  json bad = m;
  bad["guidance"]["method"] = "gd";
  bad["guidance"]["eta"] = 0.0;
  CHECK_THROWS_AS(sampler_from_json(bad), ConfigError);
  bad = m;
  bad["sampler"]["integrator"] = "rk4";
  CHECK_THROWS_AS(sampler_from_json(bad), ConfigError);
  CHECK_THROWS_AS(run_experiment("nope", json::object()), ConfigError);
}

TEST_CASE("small tasks pass their checks") {
  const TaskResult fig = run_experiment("fig1", merge_config("fig1", json()));
  CHECK(fig.pass());
  CHECK(fig.summary["rows"].size() == 41);
  const TaskResult prox = run_experiment("proximal-check", merge_config("proximal_check", json()));
  CHECK(prox.pass());
  CHECK(check_value(prox, "gn_vs_moreau_yosida") <= 1e-6);
  const TaskResult gc = run_experiment("gradcheck", merge_config("gradcheck", json{{"probes", 5}}));
  CHECK(gc.pass());
  const TaskResult ga = run_experiment(
      "gaussian", merge_config("gaussian", json{{"mc", {{"samples", 200}, {"steps", 200}, {"k", 8}}}}));
  for (const auto& c : ga.checks)
    if (c.name.rfind("moment_", 0) == 0) CHECK(c.pass);
}

TEST_CASE("trajectory task at reduced size") {
  const json cfg = merge_config("trajectory", json{{"n_x", 32}, {"sampler", {{"n_samples", 16}, {"steps", 50}}}});
  const TaskResult r = run_experiment("trajectory", cfg);
  REQUIRE(r.reports.count("vanilla"));
  REQUIRE(r.reports.count("tocflow"));
  CHECK(r.reports.at("tocflow").summary.median < r.reports.at("vanilla").summary.median);
  CHECK(r.reports.at("tocflow").extra.at("kink").size() == 16);
}

TEST_CASE("darcy task at reduced size keeps K positive") {
  const json cfg = merge_config("darcy", json{{"n", 6}, {"modes", 8}, {"train_count", 24},
                                              {"methods", {"vanilla", "tocflow"}}, {"dump_states", true},
                                              {"sampler", {{"n_samples", 4}, {"steps", 40}}}});
  const TaskResult r = run_experiment("darcy", cfg);
  for (const auto& [name, rep] : r.reports) {
    CHECK(rep.states.size() == 4);
    for (const auto& s : rep.states) {
      CHECK(s.head(36).array().exp().minCoeff() > 0.0);
      CHECK(s.allFinite());
    }
  }
  CHECK(r.summary.contains("generator_max_rms"));
}
