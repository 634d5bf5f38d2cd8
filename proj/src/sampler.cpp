#include "tocflow/sampler.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace tocflow {

Integrator integrator_from_string(const std::string& s) {
  if (s == "euler") return Integrator::Euler;
  if (s == "heun") return Integrator::Heun;
  throw std::invalid_argument("unknown integrator: " + s);
}

std::string to_string(Integrator i) { return i == Integrator::Euler ? "euler" : "heun"; }

namespace {

constexpr double kDivergence = 1e8;

void check_state(const Vec& x, int step) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergence)
    throw SampleDiverged("sample diverged at step " + std::to_string(step), step);
}

}  // namespace

Vec sample_from(const VelocityField& f, const Constraint& c, const SamplerConfig& cfg, const Vec& x0) {
  if (cfg.steps < 1) throw std::invalid_argument("sampler: steps must be >= 1");
  const auto& g = cfg.guidance;
  const int n = cfg.steps;
  const double dt = 1.0 / n;
  const double eps_s = g.eps_s < 0.0 ? dt : g.eps_s;
  Vec x = x0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    if (g.method == Method::GnApprox) {
      try {
        x = gn_approx_step(f, c, x0, x, t, dt, g.k, g.proj_budget, g.proj_inner_cg, g.proj_damping);
      } catch (const LookaheadDiverged&) {
        throw SampleDiverged("lookahead diverged at step " + std::to_string(i), i);
      }
      check_state(x, i);
      continue;
    }
    const Vec b0 = f.eval(x, t);
    Vec drift = b0;
    if (cfg.integrator == Integrator::Heun) {
      const Vec xp = x + dt * b0;
      drift = 0.5 * (b0 + f.eval(xp, t + dt));
    }
    Vec ctrl;
    if (g.method == Method::Gd || g.method == Method::Tocflow || g.method == Method::Gn) {
      double coef = g.method == Method::Gd ? g.eta : 1.0 / g.schedule.lambda(t);
      if (cfg.scale_control_by_dt) coef *= dt;
      const double s = stretched_time(g.schedule, t, eps_s);
      try {
        Vec grad;
        if (g.method == Method::Gd) grad = gd_solve(f, c, x, t, g.k);
        else if (g.method == Method::Tocflow) grad = toc_solve(f, c, x, t, g.k, s);
        else grad = gn_solve(f, c, x, t, g.k, s, g.cg_tol, g.cg_max).grad;
        ctrl = coef * grad;
      } catch (const LookaheadDiverged&) {
        throw SampleDiverged("lookahead diverged at step " + std::to_string(i), i);
      }
    }
    x += dt * drift;
    if (ctrl.size()) x -= ctrl;
    check_state(x, i);
  }
  if (g.method == Method::TerminalProjection)
    x = terminal_project(c, x, g.proj_budget, g.proj_inner_cg, g.proj_damping);
  return x;
}

Vec sample_one(const VelocityField& f, const Constraint& c, const SamplerConfig& cfg, RngStream& rng) {
  return sample_from(f, c, cfg, rng.normal_vec(f.dim()));
}

Summary summarize(const std::vector<double>& costs, const std::vector<bool>& diverged) {
  Summary s;
  std::vector<double> ok;
  double logsum = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (i < diverged.size() && diverged[i]) {
      ++s.divergences;
      continue;
    }
    ok.push_back(costs[i]);
    logsum += std::log(std::max(costs[i], 1e-300));
    sum += costs[i];
  }
  s.count = static_cast<int>(ok.size());
  if (ok.empty()) {
    s.median = s.geomean = s.mean = s.p5 = s.p50 = s.p95 = std::nan("");
    return s;
  }
  s.p5 = percentile(ok, 5);
  s.p50 = percentile(ok, 50);
  s.p95 = percentile(ok, 95);
  s.median = s.p50;
  s.geomean = std::exp(logsum / ok.size());
  s.mean = sum / ok.size();
  return s;
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TOCFLOW_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

RunReport sample_batch(const VelocityField& f, const Constraint& c, const SamplerConfig& cfg,
                       std::uint64_t seed) {
  if (cfg.n_samples < 1) throw std::invalid_argument("sample_batch: n_samples must be >= 1");
  const int n = cfg.n_samples;
  RunReport rep;
  rep.terminal_cost.assign(n, 0.0);
  rep.residual_norm.assign(n, 0.0);
  rep.wallclock_ms.assign(n, 0.0);
  rep.diverged.assign(n, false);
  std::vector<char> div(n, 0);
  if (cfg.keep_states) rep.states.assign(n, Vec());
  parallel_for(n, worker_count(cfg.threads), [&](int i) {
    const auto start = std::chrono::steady_clock::now();
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    try {
      const Vec x = sample_one(f, c, cfg, rng);
      const Vec r = c.residual(x);
      rep.terminal_cost[i] = 0.5 * r.squaredNorm();
      rep.residual_norm[i] = r.norm();
      if (cfg.keep_states) rep.states[i] = x;
    } catch (const SampleDiverged&) {
      div[i] = 1;
      rep.terminal_cost[i] = std::numeric_limits<double>::infinity();
      rep.residual_norm[i] = std::numeric_limits<double>::infinity();
    }
    rep.wallclock_ms[i] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  });
  for (int i = 0; i < n; ++i) rep.diverged[i] = div[i] != 0;
  rep.finalize();
  return rep;
}

}  // namespace tocflow
