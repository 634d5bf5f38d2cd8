#include "tocflow/constraints.hpp"
#include "tocflow/fields.hpp"

namespace tocflow {

Unroll unroll(const VelocityField& f, const Vec& x, double t, int k) {
  if (k < 1) throw std::invalid_argument("lookahead: k must be positive");
  Unroll u;
  u.h = (1.0 - t) / k;
  Vec y = x;
  if (t >= 1.0) {
    u.h = 0.0;
    u.end = y;
    return u;
  }
  u.xs.reserve(k);
  u.ts.reserve(k);
  for (int i = 0; i < k; ++i) {
    const double ti = t + i * u.h;
    u.xs.push_back(y);
    u.ts.push_back(ti);
    y += u.h * f.eval(y, ti);
    if (!y.allFinite()) throw LookaheadDiverged("lookahead: non-finite state at sub-step " + std::to_string(i));
  }
  u.end = std::move(y);
  return u;
}

Vec lookahead_flow(const VelocityField& f, const Vec& x, double t, int k) {
  return unroll(f, x, t, k).end;
}

Vec reverse_chain(const VelocityField& f, const Unroll& u, Vec seed) {
  for (std::size_t i = u.xs.size(); i-- > 0;) seed += u.h * f.vjp(u.xs[i], u.ts[i], seed);
  return seed;
}

Vec forward_chain(const VelocityField& f, const Unroll& u, Vec v) {
  for (std::size_t i = 0; i < u.xs.size(); ++i) v += u.h * f.jvp(u.xs[i], u.ts[i], v);
  return v;
}

Vec pullback_grad(const VelocityField& f, const Constraint& c, const Vec& x, double t, int k) {
  const Unroll u = unroll(f, x, t, k);
  return reverse_chain(f, u, terminal_grad(c, u.end));
}

Vec forward_sensitivity(const VelocityField& f, const Vec& x, double t, int k, const Vec& v) {
  return forward_chain(f, unroll(f, x, t, k), v);
}

}  // namespace tocflow
