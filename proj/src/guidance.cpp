#include "tocflow/guidance.hpp"

#include <algorithm>
#include <cmath>

namespace tocflow {

double WeightSchedule::lambda(double t) const {
  if (gamma == 0.0) return lambda0;
  return lambda0 * std::pow(std::max(0.0, 1.0 - t), gamma);
}

double stretched_time(const WeightSchedule& sch, double t, double eps_s) {
  const double g = sch.gamma;
  if (g < 1.0) return std::pow(1.0 - t, 1.0 - g) / (sch.lambda0 * (1.0 - g));
  if (t >= 1.0 - eps_s) return 0.0;
  if (g == 1.0) return (std::log(1.0 - t) - std::log(eps_s)) / sch.lambda0;
  return (std::pow(eps_s, 1.0 - g) - std::pow(1.0 - t, 1.0 - g)) / (sch.lambda0 * (g - 1.0));
}

Method method_from_string(const std::string& s) {
  if (s == "vanilla") return Method::Vanilla;
  if (s == "gd") return Method::Gd;
  if (s == "tocflow") return Method::Tocflow;
  if (s == "gn") return Method::Gn;
  if (s == "gn_approx") return Method::GnApprox;
  if (s == "terminal_projection") return Method::TerminalProjection;
  throw std::invalid_argument("unknown method: " + s);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Vanilla: return "vanilla";
    case Method::Gd: return "gd";
    case Method::Tocflow: return "tocflow";
    case Method::Gn: return "gn";
    case Method::GnApprox: return "gn_approx";
    case Method::TerminalProjection: return "terminal_projection";
  }
  return "?";
}

Vec gd_solve(const VelocityField& f, const Constraint& c, const Vec& x, double t, int k) {
  return pullback_grad(f, c, x, t, k);
}

double toc_damping(double s, double g2, double r2) {
  if (r2 == 0.0) return 0.0;
  return 1.0 / (1.0 + s * g2 / r2);
}

Vec toc_solve(const VelocityField& f, const Constraint& c, const Vec& x, double t, int k, double s) {
  const Unroll u = unroll(f, x, t, k);
  const Vec r = c.residual(u.end);
  const double r2 = r.squaredNorm();
  if (r2 == 0.0) return Vec::Zero(x.size());
  const Vec g = reverse_chain(f, u, c.vjp(u.end, r));
  return toc_damping(s, g.squaredNorm(), r2) * g;
}

GnResult gn_solve(const VelocityField& f, const Constraint& c, const Vec& x, double t, int k,
                  double s, double cg_tol, int cg_max) {
  const Unroll u = unroll(f, x, t, k);
  const Vec r = c.residual(u.end);
  const int rdim = static_cast<int>(r.size());
  if (cg_max <= 0) cg_max = std::min(rdim, 100);
  auto mt = [&](const Vec& a) { return reverse_chain(f, u, c.vjp(u.end, a)); };
  auto m = [&](const Vec& w) { return c.jvp(u.end, forward_chain(f, u, w)); };
  GnResult out;
  if (s == 0.0) {
    out.grad = mt(r);
    return out;
  }
  const CgResult cg = cg_solve([&](const Vec& a) { return Vec(a + s * m(mt(a))); }, r, cg_tol, cg_max);
  out.grad = mt(cg.x);
  out.converged = cg.converged;
  out.iterations = cg.iterations;
  return out;
}

Vec terminal_project(const Constraint& c, const Vec& x1, int budget, int inner_cg, double damping) {
  if (budget < 1) throw std::invalid_argument("terminal_project: budget must be >= 1");
  Vec z = x1;
  Vec best = z;
  double best_norm = c.residual(z).norm();
  for (int it = 0; it < budget; ++it) {
    const Vec h = c.residual(z);
    const double hn = h.norm();
    if (!std::isfinite(hn)) break;
    if (hn < best_norm) {
      best_norm = hn;
      best = z;
    }
    if (hn <= 1e-12) break;
    auto op = [&](const Vec& a) { return Vec(c.jvp(z, c.vjp(z, a)) + damping * a); };
    const CgResult cg = cg_solve(op, h, 1e-14, inner_cg);
    z -= c.vjp(z, cg.x);
  }
  const double hn = c.residual(z).norm();
  if (std::isfinite(hn) && hn < best_norm) best = z;
  return best;
}

Vec gn_approx_step(const VelocityField& f, const Constraint& c, const Vec& x0, const Vec& xt,
                   double t, double dt, int k, int budget, int inner_cg, double damping) {
  const Vec x1 = terminal_project(c, lookahead_flow(f, xt, t, k), budget, inner_cg, damping);
  const double tn = t + dt;
  return (1.0 - tn) * x0 + tn * x1;
}

}  // namespace tocflow
