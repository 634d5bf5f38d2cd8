#include <chrono>
#include <cmath>
#include <numbers>

#include "tocflow/experiments.hpp"
#include "tocflow/fm.hpp"
#include "tocflow/io.hpp"
#include "tocflow/oracle.hpp"

namespace tocflow {

bool TaskResult::pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

namespace {

json sampler_defaults() {
  return {{"steps", 200}, {"integrator", "heun"}, {"scale_control_by_dt", true},
          {"n_samples", 64}, {"seed", 0},         {"threads", 0}};
}

json guidance_defaults() {
  return {{"method", "tocflow"}, {"k", 4},          {"eta", 0.1},         {"lambda0", 1.0},
          {"gamma", 0.0},        {"cg_tol", 1e-8},  {"cg_max", 0},        {"proj_budget", 1000},
          {"proj_inner_cg", 20}, {"proj_damping", 1e-12}, {"eps_s", -1.0}};
}

void merge_into(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config at '" + path + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
    } else {
      const bool ok = (slot.is_number() && it.value().is_number()) ||
                      (slot.is_string() && it.value().is_string()) ||
                      (slot.is_boolean() && it.value().is_boolean()) ||
                      (slot.is_array() && it.value().is_array());
      if (!ok) throw ConfigError("config key '" + key + "' has the wrong type");
      slot = it.value();
    }
  }
}

Check make_check(std::string name, double value, double threshold, bool pass, std::string detail = "") {
  return Check{std::move(name), value, threshold, pass, std::move(detail)};
}

json checks_json(const std::vector<Check>& cs) {
  json arr = json::array();
  for (const auto& c : cs)
    arr.push_back({{"name", c.name}, {"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                   {"threshold", c.threshold}, {"pass", c.pass}, {"detail", c.detail}});
  return arr;
}

std::vector<std::string> methods_of(const json& cfg) { return cfg.at("methods").get<std::vector<std::string>>(); }

void finish(TaskResult& res) {
  res.summary["checks"] = checks_json(res.checks);
  json reps = json::object();
  for (const auto& [name, r] : res.reports) reps[name] = summary_to_json(r.summary);
  res.summary["methods"] = reps;
  res.summary["pass"] = res.pass();
}

std::vector<Vec> load_or_generate(const json& cfg, const std::function<std::vector<Vec>()>& gen) {
  const std::string path = cfg.at("dataset").get<std::string>();
  if (path.empty()) return gen();
  try {
    return read_array(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string(e.what()) + " (create it with the gen-data subcommand)");
  }
}

}  // namespace

json default_config(const std::string& task) {
  if (task == "gaussian")
    return {{"mu", 2.0}, {"sigma", 1.0}, {"lambda", 1.0}, {"moment_steps", 4000}, {"tolerance", 1e-3},
            {"mc", {{"enabled", true}, {"samples", 10000}, {"steps", 2000}, {"k", 64}, {"seed", 0},
                    {"integrator", "heun"}}}};
  if (task == "fig1")
    return {{"mu", 2.0}, {"sigma", 1.0}, {"lambda_min", 1e-2}, {"lambda_max", 1e2}, {"count", 41}};
  if (task == "proximal_check")
    return {{"seed", 0}, {"trials", 20}, {"k", 4}, {"tolerance", 1e-6}};
  if (task == "trajectory") {
    json s = sampler_defaults();
    s["n_samples"] = 256;
    s["scale_control_by_dt"] = false;
    json g = guidance_defaults();
    g["lambda0"] = 0.01;
    g["eta"] = 10.0;
    g["proj_budget"] = 1;
    return {{"n_x", 64}, {"corridor_seed", 1}, {"dump_states", false},
            {"methods", {"vanilla", "gd", "tocflow", "terminal_projection"}},
            {"sampler", s}, {"guidance", g}};
  }
  if (task == "darcy") {
    json s = sampler_defaults();
    s["n_samples"] = 128;
    s["steps"] = 1000;
    json g = guidance_defaults();
    g["lambda0"] = 1.0;
    g["eta"] = 1e-4;
    return {{"n", 16}, {"modes", 32}, {"length", 0.1}, {"train_count", 256}, {"data_seed", 7},
            {"dataset", ""}, {"dump_states", false},
            {"methods", {"vanilla", "gd", "tocflow", "terminal_projection"}},
            {"sampler", s}, {"guidance", g}};
  }
  if (task == "spectrum") {
    json s = sampler_defaults();
    s["n_samples"] = 64;
    s["integrator"] = "euler";
    json g = guidance_defaults();
    g["lambda0"] = 1e-6;
    g["eta"] = 1000.0;
    return {{"n", 64}, {"data_beta", 2.0}, {"amplitude", 64.0}, {"train_count", 64}, {"data_seed", 11},
            {"dataset", ""}, {"dump_states", false}, {"methods", {"vanilla", "tocflow"}},
            {"sampler", s}, {"guidance", g}};
  }
  if (task == "fm")
    return {{"mu", 2.0}, {"sigma", 1.0}, {"batch", 2048}, {"iterations", 5000}, {"lr", 3e-3},
            {"beta1", 0.9}, {"beta2", 0.999}, {"adam_eps", 1e-8}, {"hidden", {64, 64}},
            {"activation", "tanh"}, {"seed", 0}, {"rms_threshold", 0.1},
            {"grid", {{"x_min", -3.0}, {"x_max", 5.0}, {"nx", 81}, {"t_min", 0.05}, {"t_max", 0.95}, {"nt", 19}}}};
  if (task == "gradcheck")
    return {{"probes", 50}, {"seed", 0}, {"eps", 1e-5}, {"adjoint_tol", 1e-10}, {"grad_tol", 1e-5}};
  if (task == "gen-data")
    return {{"which", {"darcy", "spectrum"}},
            {"darcy", {{"n", 16}, {"modes", 32}, {"length", 0.1}, {"count", 256}, {"seed", 7}}},
            {"spectrum", {{"n", 64}, {"beta", 2.0}, {"amplitude", 64.0}, {"count", 64}, {"seed", 11}}}};
  throw ConfigError("unknown task '" + task + "'");
}

json merge_config(const std::string& task, const json& user) {
  json base = default_config(task);
  if (!user.is_null()) merge_into(base, user, "");
  return base;
}

GuidanceConfig guidance_from_json(const json& g) {
  GuidanceConfig c;
  try {
    c.method = method_from_string(g.at("method"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.k = g.at("k");
  c.eta = g.at("eta");
  c.schedule.lambda0 = g.at("lambda0");
  c.schedule.gamma = g.at("gamma");
  c.cg_tol = g.at("cg_tol");
  c.cg_max = g.at("cg_max");
  c.proj_budget = g.at("proj_budget");
  c.proj_inner_cg = g.at("proj_inner_cg");
  c.proj_damping = g.at("proj_damping");
  c.eps_s = g.at("eps_s");
  if (c.k < 1 || c.proj_budget < 1 || c.proj_inner_cg < 1) throw ConfigError("guidance budgets must be >= 1");
  if (!(c.schedule.lambda0 > 0.0) || c.schedule.gamma < 0.0) throw ConfigError("invalid weight schedule");
  if (c.method == Method::Gd && !(c.eta > 0.0)) throw ConfigError("eta must be positive for gd");
  return c;
}

SamplerConfig sampler_from_json(const json& cfg) {
  SamplerConfig s;
  const json& sj = cfg.at("sampler");
  s.steps = sj.at("steps");
  try {
    s.integrator = integrator_from_string(sj.at("integrator"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  s.scale_control_by_dt = sj.at("scale_control_by_dt");
  s.n_samples = sj.at("n_samples");
  s.seed = sj.at("seed").get<std::uint64_t>();
  s.threads = sj.at("threads");
  s.guidance = guidance_from_json(cfg.at("guidance"));
  if (s.steps < 1 || s.n_samples < 1) throw ConfigError("sampler steps and n_samples must be >= 1");
  return s;
}

double sample_affine_1d(double mu, double sigma, const SamplerConfig& cfg, double x0) {
  const Affine1DField f(mu, sigma);
  const auto& g = cfg.guidance;
  const int n = cfg.steps;
  const double dt = 1.0 / n;
  const double eps_s = g.eps_s < 0.0 ? dt : g.eps_s;
  if (g.method != Method::Vanilla && g.method != Method::Gd && g.method != Method::Tocflow)
    throw std::invalid_argument("sample_affine_1d: method not supported");
  std::vector<double> ys(g.k), ts(g.k);
  double x = x0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double b0 = f.alpha(t) * x + f.beta(t);
    double drift = b0;
    if (cfg.integrator == Integrator::Heun) {
      const double xp = x + dt * b0;
      drift = 0.5 * (b0 + f.alpha(t + dt) * xp + f.beta(t + dt));
    }
    double ctrl = 0.0;
    if (g.method != Method::Vanilla) {
      const double h = (1.0 - t) / g.k;
      double y = x;
      for (int j = 0; j < g.k; ++j) {
        ts[j] = t + j * h;
        ys[j] = y;
        y += h * (f.alpha(ts[j]) * y + f.beta(ts[j]));
      }
      double u = y;
      for (int j = g.k; j-- > 0;) u += h * f.alpha(ts[j]) * u;
      double grad = u;
      if (g.method == Method::Tocflow) {
        const double s = stretched_time(g.schedule, t, eps_s);
        grad = y == 0.0 ? 0.0 : toc_damping(s, u * u, y * y) * u;
      }
      double coef = g.method == Method::Gd ? g.eta : 1.0 / g.schedule.lambda(t);
      if (cfg.scale_control_by_dt) coef *= dt;
      ctrl = coef * grad;
    }
    x += dt * drift;
    x -= ctrl;
    if (!std::isfinite(x) || std::abs(x) > 1e8) throw SampleDiverged("affine sample diverged", i);
  }
  return x;
}

TaskResult run_gaussian(const json& cfg) {
  TaskResult res;
  const double mu = cfg.at("mu"), sigma = cfg.at("sigma"), lam = cfg.at("lambda");
  const double tol = cfg.at("tolerance");
  const int nsteps = cfg.at("moment_steps");
  const Gaussian1DModel m{mu, sigma, WeightSchedule{lam, 0.0}};
  const OracleMoments ex = exact_moments(m), gd = scheme_moments(m, Scheme::Gd),
                      toc = scheme_moments(m, Scheme::Tocflow);
  res.summary["gamma_lambda"] = gamma_lambda(m);
  res.summary["eta_lambda"] = eta_lambda(m);
  res.summary["oracle"] = {{"exact", {ex.mean, ex.std}}, {"gd", {gd.mean, gd.std}}, {"tocflow", {toc.mean, toc.std}}};

  struct Case {
    std::string name;
    GainBias gb;
    OracleMoments ref;
  };
  const std::vector<Case> cases{{"exact", riccati_gain(m), ex}, {"gd", gd_gain(m), gd}, {"tocflow", toc_gain(m), toc}};
  double worst = 0.0;
  json sim = json::object();
  for (const auto& c : cases) {
    const OracleMoments s = moment_simulate(m, c.gb.gain, c.gb.bias, nsteps);
    const double dm = std::abs(s.mean - c.ref.mean) / std::abs(c.ref.mean);
    const double ds = std::abs(s.std - c.ref.std) / c.ref.std;
    worst = std::max({worst, dm, ds});
    sim[c.name] = {{"mean", s.mean}, {"std", s.std}, {"rel_mean", dm}, {"rel_std", ds}};
    res.checks.push_back(make_check("moment_" + c.name, std::max(dm, ds), tol, std::max(dm, ds) <= tol));
  }
  res.summary["moment_simulate"] = sim;
  res.summary["max_relative_delta"] = worst;

  const json& mc = cfg.at("mc");
  if (mc.at("enabled").get<bool>()) {
    const int ns = mc.at("samples"), steps = mc.at("steps"), k = mc.at("k");
    const std::uint64_t seed = mc.at("seed").get<std::uint64_t>();
    SamplerConfig sc;
    sc.steps = steps;
    sc.integrator = integrator_from_string(mc.at("integrator"));
    sc.scale_control_by_dt = true;
    sc.guidance.k = k;
    sc.guidance.schedule = WeightSchedule{lam, 0.0};
    sc.guidance.eta = 1.0 / lam;

    // Riccati closed loop on a shared feedback table.
    std::vector<double> pt(steps + 1), qt(steps + 1);
    for (int i = 0; i <= steps; ++i) {
      const RiccatiState st = riccati(m, static_cast<double>(i) / steps);
      pt[i] = st.p;
      qt[i] = st.q;
    }
    auto exact_sample = [&](double x) {
      const double dt = 1.0 / steps;
      auto rhs = [&](int i, double xx) {
        const double t = static_cast<double>(i) / steps;
        return m.alpha(t) * xx + m.beta(t) - (pt[i] * xx + qt[i]) / lam;
      };
      for (int i = 0; i < steps; ++i) {
        const double k1 = rhs(i, x);
        const double k2 = rhs(i + 1, x + dt * k1);
        x += 0.5 * dt * (k1 + k2);
      }
      return x;
    };
    json mcj = json::object();
    for (const auto& c : cases) {
      std::vector<double> xs(ns);
      SamplerConfig cc = sc;
      if (c.name == "gd") cc.guidance.method = Method::Gd;
      if (c.name == "tocflow") cc.guidance.method = Method::Tocflow;
      for (int i = 0; i < ns; ++i) {
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        const double x0 = rng.normal();
        xs[i] = c.name == "exact" ? exact_sample(x0) : sample_affine_1d(mu, sigma, cc, x0);
      }
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= ns;
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= (ns - 1);
      const double sd = std::sqrt(var);
      const double se_mean = sd / std::sqrt(static_cast<double>(ns));
      const double se_std = sd / std::sqrt(2.0 * (ns - 1));
      const double zm = std::abs(mean - c.ref.mean) / se_mean;
      const double zs = std::abs(sd - c.ref.std) / se_std;
      mcj[c.name] = {{"mean", mean}, {"std", sd}, {"z_mean", zm}, {"z_std", zs}};
      res.checks.push_back(make_check("mc_" + c.name, std::max(zm, zs), 3.0, std::max(zm, zs) <= 3.0,
                                      "standard errors from the closed form"));
    }
    res.summary["monte_carlo"] = mcj;
  }
  finish(res);
  return res;
}

TaskResult run_fig1(const json& cfg) {
  TaskResult res;
  const double lo = cfg.at("lambda_min"), hi = cfg.at("lambda_max");
  const int count = cfg.at("count");
  if (!(lo > 0.0) || !(hi > lo) || count < 2) throw ConfigError("fig1: invalid lambda grid");
  std::vector<double> lams;
  for (int i = 0; i < count; ++i) lams.push_back(std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i / (count - 1)));
  const auto rows = fig1_curve(cfg.at("sigma"), cfg.at("mu"), lams);
  int bad_gd = 0, bad_order = 0, bad_mono = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.gd > r.exact) ++bad_gd;
    if (r.lambda <= 1.0 + 1e-12 && !(r.gd < r.exact && r.exact < r.toc)) ++bad_order;
    if (i > 0 && (r.exact < rows[i - 1].exact || r.gd < rows[i - 1].gd || r.toc < rows[i - 1].toc)) ++bad_mono;
  }
  res.checks.push_back(make_check("gd_below_exact", bad_gd, 0, bad_gd == 0));
  res.checks.push_back(make_check("ordering_lambda_le_1", bad_order, 0, bad_order == 0));
  res.checks.push_back(make_check("monotone_in_lambda", bad_mono, 0, bad_mono == 0));
  json table = json::array();
  for (const auto& r : rows) table.push_back({r.lambda, r.exact, r.gd, r.toc});
  res.summary["rows"] = table;
  finish(res);
  return res;
}

namespace {

// Minimizes a smooth objective from function values only: Newton steps with central
// finite-difference gradient and Hessian.
Vec fd_newton_minimize(const std::function<double(const Vec&)>& f, Vec z, int iters) {
  const int d = static_cast<int>(z.size());
  for (int it = 0; it < iters; ++it) {
    const double h = 1e-3 * std::max(1.0, z.cwiseAbs().maxCoeff());
    Vec g(d);
    Mat hs(d, d);
    const double f0 = f(z);
    for (int i = 0; i < d; ++i) {
      Vec zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      g[i] = (f(zp) - f(zm)) / (2 * h);
      hs(i, i) = (f(zp) - 2 * f0 + f(zm)) / (h * h);
      for (int j = 0; j < i; ++j) {
        Vec a = z, b = z, c = z, e = z;
        a[i] += h; a[j] += h;
        b[i] += h; b[j] -= h;
        c[i] -= h; c[j] += h;
        e[i] -= h; e[j] -= h;
        hs(i, j) = hs(j, i) = (f(a) - f(b) - f(c) + f(e)) / (4 * h * h);
      }
    }
    z -= hs.ldlt().solve(g);
  }
  return z;
}

}  // namespace

TaskResult run_proximal_check(const json& cfg) {
  TaskResult res;
  const int trials = cfg.at("trials"), k = cfg.at("k");
  const double tol = cfg.at("tolerance");
  RngStream rng(cfg.at("seed").get<std::uint64_t>(), 0);
  double worst = 0.0, worst_line = -1e300;
  for (int tr = 0; tr < trials; ++tr) {
    const int r = 1 + tr % 2;
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = rng.uniform(-1.0, 1.0);
    a(1, 1) = rng.uniform(-1.0, 1.0);
    const LinearField field(a);
    Mat cm(r, 2);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < 2; ++j) cm(i, j) = rng.normal();
    const Vec e = rng.normal_vec(r);
    const LinearConstraint con(cm, e);
    const Vec x = 2.0 * rng.normal_vec(2);
    const double t = rng.uniform(0.0, 0.9);
    const double s = rng.uniform(0.1, 3.0);

    const double h = (1.0 - t) / k;
    Vec dphi(2);
    for (int i = 0; i < 2; ++i) dphi[i] = std::pow(1.0 + h * a(i, i), k);
    const Vec gdiag = dphi.cwiseAbs2();
    Vec y = x;
    for (int i = 0; i < k; ++i) y = y + h * (a * y);

    auto objective = [&](const Vec& z) {
      const Vec rr = cm * z - e;
      const Vec dz = z - y;
      return 0.5 * rr.squaredNorm() + 0.5 / s * dz.cwiseQuotient(gdiag).dot(dz);
    };
    const Vec yplus = fd_newton_minimize(objective, y, 4);
    const Vec grad_y = (y - yplus).cwiseQuotient(gdiag) / s;
    const Vec my_grad = dphi.cwiseProduct(grad_y);
    const Vec gn = gn_solve(field, con, x, t, k, s, 1e-14, 10).grad;
    const double rel = (gn - my_grad).norm() / std::max(my_grad.norm(), 1e-300);
    worst = std::max(worst, rel);

    // Objective along z(tau) = y - s tau G grad H(y) never beats the proximal optimum.
    const Vec gy = cm.transpose() * (cm * y - e);
    const double fopt = objective(yplus);
    const Vec gx = dphi.cwiseProduct(gy);
    const double tau_star = toc_damping(s, gx.squaredNorm(), (cm * y - e).squaredNorm());
    double best_line = objective(y - s * tau_star * gdiag.cwiseProduct(gy));
    for (int q = 0; q <= 400; ++q) {
      const double tau = 2.0 * q / 400;
      best_line = std::min(best_line, objective(y - s * tau * gdiag.cwiseProduct(gy)));
    }
    worst_line = std::max(worst_line, fopt - best_line);
  }
  res.checks.push_back(make_check("gn_vs_moreau_yosida", worst, tol, worst <= tol));
  res.checks.push_back(make_check("line_value_above_optimum", worst_line, 1e-12, worst_line <= 1e-12,
                                  "max over trials of optimum minus best line value"));
  finish(res);
  return res;
}

TaskResult run_trajectory(const json& cfg) {
  TaskResult res;
  GPTrajectorySpec spec;
  spec.n_x = cfg.at("n_x");
  const auto field = gen_gp_mixture_field(spec);
  RngStream crng(cfg.at("corridor_seed").get<std::uint64_t>(), 0);
  const auto corridors = gen_corridors(spec, crng);
  json spans = json::array();
  for (const auto& sp : corridors.spans())
    spans.push_back({{"start", sp.index.front()}, {"length", sp.index.size()}, {"lower", sp.lower}, {"upper", sp.upper}});
  res.summary["corridors"] = spans;

  SamplerConfig base = sampler_from_json(cfg);
  base.keep_states = true;
  for (const auto& name : methods_of(cfg)) {
    SamplerConfig sc = base;
    sc.guidance.method = method_from_string(name);
    RunReport rep = sample_batch(field, corridors, sc, sc.seed);
    std::vector<double> kinks(rep.states.size(), std::nan(""));
    for (std::size_t i = 0; i < rep.states.size(); ++i)
      if (rep.states[i].size()) kinks[i] = kink_metric(rep.states[i]);
    rep.extra["kink"] = kinks;
    if (!cfg.at("dump_states").get<bool>()) rep.states.clear();
    res.reports[name] = std::move(rep);
  }
  auto median_kink = [&](const std::string& m) {
    std::vector<double> v;
    for (std::size_t i = 0; i < res.reports.at(m).extra.at("kink").size(); ++i)
      if (!res.reports.at(m).diverged[i]) v.push_back(res.reports.at(m).extra.at("kink")[i]);
    return percentile(v, 50);
  };
  auto has = [&](const std::string& m) { return res.reports.count(m) > 0; };
  json kinks = json::object();
  for (const auto& [name, r] : res.reports) kinks[name] = median_kink(name);
  res.summary["median_kink"] = kinks;
  if (has("vanilla")) {
    const double v = res.reports.at("vanilla").summary.median;
    res.checks.push_back(make_check("vanilla_median_positive", v, 0.0, v > 0.0));
  }
  if (has("tocflow")) {
    const double v = res.reports.at("tocflow").summary.median;
    res.checks.push_back(make_check("tocflow_median", v, 1e-8, v <= 1e-8));
    if (has("gd")) {
      const double g = res.reports.at("gd").summary.median;
      res.checks.push_back(make_check("tocflow_le_gd_median", v, g, v <= g));
    }
  }
  if (has("terminal_projection")) {
    const double v = res.reports.at("terminal_projection").summary.median;
    res.checks.push_back(make_check("projection_median", v, 1e-12, v <= 1e-12));
    if (has("tocflow")) {
      const double kp = median_kink("terminal_projection"), kt = median_kink("tocflow");
      res.checks.push_back(make_check("projection_kink_gt_tocflow", kp, kt, kp > kt));
    }
  }
  finish(res);
  return res;
}

TaskResult run_darcy(const json& cfg) {
  TaskResult res;
  DarcyGenSpec spec;
  spec.n = cfg.at("n");
  spec.modes = cfg.at("modes");
  spec.length = cfg.at("length");
  const DarcyConstraint con(spec.n, spec.source);
  const int count = cfg.at("train_count");
  const auto data = load_or_generate(cfg, [&] {
    RngStream rng(cfg.at("data_seed").get<std::uint64_t>(), 0);
    return gen_darcy_pairs(spec, rng, count);
  });
  if (data.empty() || data[0].size() != 2 * spec.n * spec.n)
    throw ConfigError("darcy dataset does not match the configured grid");

  double worst_rms = 0.0;
  for (const auto& s : data) worst_rms = std::max(worst_rms, con.residual(s).norm() / std::sqrt(con.dim()));
  res.summary["generator_max_rms"] = worst_rms;
  res.checks.push_back(make_check("generator_rms", worst_rms, 1e-6, worst_rms <= 1e-6,
                                  "max over generated pairs of RMS residual"));

  const auto field = fit_gaussian_reference(data);
  const SamplerConfig base = sampler_from_json(cfg);
  for (const auto& name : methods_of(cfg)) {
    SamplerConfig sc = base;
    sc.guidance.method = method_from_string(name);
    sc.keep_states = cfg.at("dump_states").get<bool>();
    res.reports[name] = sample_batch(field, con, sc, sc.seed);
  }
  if (res.reports.count("vanilla") && res.reports.count("tocflow")) {
    const double v = res.reports.at("vanilla").summary.mean, t = res.reports.at("tocflow").summary.mean;
    res.checks.push_back(make_check("tocflow_mean_ratio", t / v, 0.2, t <= 0.2 * v));
  }
  finish(res);
  return res;
}

TaskResult run_spectrum(const json& cfg) {
  TaskResult res;
  const int n = cfg.at("n");
  const SpectrumConstraint con(n);
  RngStream srng(cfg.at("data_seed").get<std::uint64_t>(), 1000);
  SpectrumGenSpec k53{n, 5.0 / 3.0, cfg.at("amplitude")};
  SpectrumGenSpec k2{n, 2.0, cfg.at("amplitude")};
  const double r53 = spectrum_residual(con, gen_spectrum_field(k53, srng));
  const double r2 = spectrum_residual(con, gen_spectrum_field(k2, srng));
  double ref2 = 0.0, mean = 0.0;
  for (int k = 2; k <= 9; ++k) mean += -std::log(k) / 3.0 / 8.0;
  for (int k = 2; k <= 9; ++k) ref2 += std::pow(-std::log(k) / 3.0 - mean, 2) / 8.0;
  res.checks.push_back(make_check("kolmogorov_field_residual", r53, 1e-3, r53 <= 1e-3));
  res.checks.push_back(make_check("k2_field_residual", r2, ref2, std::abs(r2 - ref2) <= 0.1 * ref2,
                                  "within 10 percent of the variance of -(1/3) log k"));

  const int count = cfg.at("train_count");
  const auto data = load_or_generate(cfg, [&] {
    SpectrumGenSpec sp{n, cfg.at("data_beta"), cfg.at("amplitude")};
    RngStream rng(cfg.at("data_seed").get<std::uint64_t>(), 0);
    std::vector<Vec> out;
    for (int i = 0; i < count; ++i) out.push_back(gen_spectrum_field(sp, rng));
    return out;
  });
  if (data.empty() || data[0].size() != n * n) throw ConfigError("spectrum dataset does not match the grid");
  const auto field = fit_gaussian_reference(data);
  const SamplerConfig base = sampler_from_json(cfg);
  for (const auto& name : methods_of(cfg)) {
    SamplerConfig sc = base;
    sc.guidance.method = method_from_string(name);
    sc.keep_states = cfg.at("dump_states").get<bool>();
    res.reports[name] = sample_batch(field, con, sc, sc.seed);
  }
  // Residual statistics: h = sqrt(2 H).
  auto median_h = [&](const std::string& m) {
    std::vector<double> v;
    const auto& r = res.reports.at(m);
    for (std::size_t i = 0; i < r.residual_norm.size(); ++i)
      if (!r.diverged[i]) v.push_back(r.residual_norm[i]);
    return percentile(v, 50);
  };
  json med = json::object();
  for (const auto& [name, r] : res.reports) med[name] = median_h(name);
  res.summary["median_residual"] = med;
  if (res.reports.count("vanilla") && res.reports.count("tocflow")) {
    const double v = median_h("vanilla"), t = median_h("tocflow");
    res.checks.push_back(make_check("tocflow_median_ratio", t / v, 0.1, t <= 0.1 * v));
  }
  finish(res);
  return res;
}

TaskResult run_fm(const json& cfg) {
  TaskResult res;
  FMTrainConfig fc;
  fc.batch = cfg.at("batch");
  fc.iterations = cfg.at("iterations");
  fc.lr = cfg.at("lr");
  fc.beta1 = cfg.at("beta1");
  fc.beta2 = cfg.at("beta2");
  fc.adam_eps = cfg.at("adam_eps");
  fc.hidden = cfg.at("hidden").get<std::vector<int>>();
  fc.activation = activation_from_string(cfg.at("activation"));
  fc.seed = cfg.at("seed").get<std::uint64_t>();
  if (fc.batch < 1 || fc.iterations < 1 || !(fc.lr >= 0.0)) throw ConfigError("fm: invalid training config");
  const double mu = cfg.at("mu"), sigma = cfg.at("sigma");
  const Affine1DField ref(mu, sigma);
  auto target = [&](RngStream& rng) {
    Vec v(1);
    v[0] = mu + sigma * rng.normal();
    return v;
  };
  auto [field, trace] = train(target, 1, fc);
  const json& g = cfg.at("grid");
  const double rms = field_rms_1d(field, ref, g.at("x_min"), g.at("x_max"), g.at("nx"), g.at("t_min"),
                                  g.at("t_max"), g.at("nt"));
  // Same grid restricted to points within two standard deviations of the law of x_t.
  double core = 0.0;
  int core_n = 0;
  {
    const int nx = g.at("nx"), nt = g.at("nt");
    const double xa = g.at("x_min"), xb = g.at("x_max"), ta = g.at("t_min"), tb = g.at("t_max");
    Vec xv(1);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nt; ++j) {
        xv[0] = xa + (xb - xa) * i / (nx - 1);
        const double t = ta + (tb - ta) * j / (nt - 1);
        if (std::abs(xv[0] - t * mu) > 2.0 * ref.v(t)) continue;
        const double e = field.eval(xv, t)[0] - ref.eval(xv, t)[0];
        core += e * e;
        ++core_n;
      }
  }
  res.summary["field_rms_within_2sd"] = core_n ? std::sqrt(core / core_n) : 0.0;
  const std::size_t w = std::max<std::size_t>(1, trace.loss.size() / 10);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    first += trace.loss[i] / w;
    last += trace.loss[trace.loss.size() - w + i] / w;
  }
  const double thr = cfg.at("rms_threshold");
  res.summary["field_rms"] = rms;
  res.summary["loss_first_window"] = first;
  res.summary["loss_last_window"] = last;
  res.summary["field"] = mlp_to_json(field);
  res.summary["trace"] = trace.loss;
  res.checks.push_back(make_check("field_rms", rms, thr, rms <= thr));
  res.checks.push_back(make_check("loss_decreasing", last, first, last <= first));
  finish(res);
  return res;
}

TaskResult run_experiment(const std::string& name, const json& config) {
  const std::string task = name == "proximal-check" ? "proximal_check" : name == "fm-train" ? "fm" : name;
  const json cfg = merge_config(task, config);
  if (task == "gaussian") return run_gaussian(cfg);
  if (task == "fig1") return run_fig1(cfg);
  if (task == "proximal_check") return run_proximal_check(cfg);
  if (task == "trajectory") return run_trajectory(cfg);
  if (task == "darcy") return run_darcy(cfg);
  if (task == "spectrum") return run_spectrum(cfg);
  if (task == "fm") return run_fm(cfg);
  if (task == "gradcheck") return run_gradcheck(cfg);
  throw ConfigError("unknown experiment '" + name + "'");
}

}  // namespace tocflow
