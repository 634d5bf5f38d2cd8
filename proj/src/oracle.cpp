#include "tocflow/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace tocflow {

double Gaussian1DModel::v(double t) const {
  return std::sqrt((1.0 - t) * (1.0 - t) + t * t * sigma * sigma);
}

double Gaussian1DModel::alpha(double t) const {
  const double vv = (1.0 - t) * (1.0 - t) + t * t * sigma * sigma;
  return (t * sigma * sigma - (1.0 - t)) / vv;
}

double Gaussian1DModel::beta(double t) const { return mu * (1.0 - t * alpha(t)); }

double schedule_integral(const Gaussian1DModel& m, const std::function<double(double)>& g,
                         double a, int n) {
  const double l0 = m.schedule.lambda0;
  const double gam = m.schedule.gamma;
  if (gam == 0.0) return simpson_quad([&](double t) { return g(t); }, a, 1.0, n) / l0;
  if (gam < 1.0) {
    // t = 1 - w^(1/(1-gamma)) makes dt / lambda = dw / (lambda0 (1-gamma)).
    const double p = 1.0 / (1.0 - gam);
    const double wmax = std::pow(1.0 - a, 1.0 - gam);
    return simpson_quad([&](double w) { return g(1.0 - std::pow(w, p)); }, 0.0, wmax, n) /
           (l0 * (1.0 - gam));
  }
  const double upper = 1.0 - m.eps_s;
  if (a >= upper) return 0.0;
  // u = -log(1-t): dt / lambda = exp((gamma-1) u) du / lambda0.
  const double u0 = -std::log1p(-a), u1 = -std::log(m.eps_s);
  return simpson_quad([&](double u) { return g(-std::expm1(-u)) * std::exp((gam - 1.0) * u); },
                      u0, u1, n) / l0;
}

double gamma_lambda(const Gaussian1DModel& m) {
  return m.sigma * m.sigma * schedule_integral(m, [&](double t) { return 1.0 / (m.v(t) * m.v(t)); });
}

double eta_lambda(const Gaussian1DModel& m) {
  const double s2 = m.sigma * m.sigma;
  return schedule_integral(m, [&](double t) {
    const double vv = m.v(t) * m.v(t);
    return s2 / (vv + s2 * m.s(t));
  });
}

OracleMoments exact_moments(const Gaussian1DModel& m) {
  const double g = gamma_lambda(m);
  return {m.mu / (1.0 + g), m.sigma / (1.0 + g), Scheme::Exact};
}

OracleMoments scheme_moments(const Gaussian1DModel& m, Scheme scheme) {
  if (scheme == Scheme::Exact) return exact_moments(m);
  const double e = scheme == Scheme::Gd ? std::exp(-gamma_lambda(m)) : std::exp(-eta_lambda(m));
  return {m.mu * e, m.sigma * e, scheme};
}

RiccatiState riccati(const Gaussian1DModel& m, double t) {
  const double vt = m.v(t);
  const double tail = schedule_integral(m, [&](double u) { return 1.0 / (m.v(u) * m.v(u)); }, t);
  RiccatiState st;
  st.p = 1.0 / (vt * vt * (1.0 / (m.sigma * m.sigma) + tail));
  st.r = -m.mu * (vt / m.sigma - t);
  st.q = -st.p * st.r;
  return st;
}

double riccati_feedback(const Gaussian1DModel& m, double x, double t) {
  const RiccatiState st = riccati(m, t);
  return -(st.p * x + st.q) / m.lambda(t);
}

OracleMoments moment_simulate(const Gaussian1DModel& m, const ScalarFn& gain, const ScalarFn& bias,
                              int steps) {
  if (steps < 2) throw std::invalid_argument("moment_simulate: steps must be >= 2");
  const double dt = 1.0 / steps;
  double mean = 0.0, var = 1.0;
  auto rhs = [&](double t, double mm, double vv, double& dm, double& dv) {
    const double a = m.alpha(t) - gain(t);
    dm = a * mm + m.beta(t) - bias(t);
    dv = 2.0 * a * vv;
  };
  for (int i = 0; i < steps; ++i) {
    const double t = i * dt;
    double dm0, dv0, dm1, dv1;
    rhs(t, mean, var, dm0, dv0);
    rhs(t + dt, mean + dt * dm0, var + dt * dv0, dm1, dv1);
    mean += 0.5 * dt * (dm0 + dm1);
    var += 0.5 * dt * (dv0 + dv1);
  }
  return {mean, std::sqrt(var), Scheme::Exact};
}

GainBias gd_gain(const Gaussian1DModel& m) {
  GainBias gb;
  gb.gain = [m](double t) { return m.sigma * m.sigma / (m.lambda(t) * m.v(t) * m.v(t)); };
  gb.bias = [m](double t) {
    const double k = m.sigma * m.sigma / (m.lambda(t) * m.v(t) * m.v(t));
    return m.sigma * m.mu / (m.lambda(t) * m.v(t)) - k * m.mu * t;
  };
  return gb;
}

GainBias toc_gain(const Gaussian1DModel& m) {
  GainBias gb;
  auto tau = [m](double t) {
    const double vv = m.v(t) * m.v(t);
    return vv / (vv + m.sigma * m.sigma * m.s(t));
  };
  gb.gain = [m, tau](double t) {
    return tau(t) * m.sigma * m.sigma / (m.lambda(t) * m.v(t) * m.v(t));
  };
  gb.bias = [m, tau](double t) {
    const double k = m.sigma * m.sigma / (m.lambda(t) * m.v(t) * m.v(t));
    return tau(t) * (m.sigma * m.mu / (m.lambda(t) * m.v(t)) - k * m.mu * t);
  };
  return gb;
}

GainBias riccati_gain(const Gaussian1DModel& m) {
  GainBias gb;
  gb.gain = [m](double t) { return riccati(m, t).p / m.lambda(t); };
  gb.bias = [m](double t) { return riccati(m, t).q / m.lambda(t); };
  return gb;
}

namespace {

// Probabilists' Gauss-Hermite rule by Golub-Welsch.
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  Mat j = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Mat> es(j);
  nodes.resize(n);
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    nodes[k] = es.eigenvalues()[k];
    const double v0 = es.eigenvectors()(0, k);
    weights[k] = v0 * v0;
  }
}

struct FeedbackTable {
  std::vector<double> t, p, q, lam;
};

// P, Q, lambda on the half-step grid used by RK4.
FeedbackTable feedback_table(const Gaussian1DModel& m, int steps) {
  FeedbackTable tb;
  const int n = 2 * steps + 1;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (2 * steps);
    const RiccatiState st = riccati(m, t);
    tb.t.push_back(t);
    tb.p.push_back(st.p);
    tb.q.push_back(st.q);
    tb.lam.push_back(m.lambda(t));
  }
  return tb;
}

double simpson_samples(const std::vector<double>& y, double h) {
  const std::size_t n = y.size() - 1;
  double s = y.front() + y.back();
  for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * y[i];
  return s * h / 3.0;
}

}  // namespace

EnergyCheck energy_equivalence_check(const Gaussian1DModel& m, int steps) {
  if (steps < 2 || steps % 2) throw std::invalid_argument("energy check: steps must be even");
  const FeedbackTable tb = feedback_table(m, steps);
  const double dt = 1.0 / steps;

  // Eulerian frame: moments of X_t under the closed loop, energy from E[a^2] in closed form.
  auto x_rhs = [&](int h, double mm, double vv, double& dm, double& dv) {
    const double t = tb.t[h];
    const double kap = tb.p[h] / tb.lam[h];
    dm = (m.alpha(t) - kap) * mm + m.beta(t) - tb.q[h] / tb.lam[h];
    dv = 2.0 * (m.alpha(t) - kap) * vv;
  };
  // Co-moving frame anchored at t = 0: Z = (X - mu t) / v(t) moves with w = a / v only.
  auto z_rhs = [&](int h, double mm, double vv, double& dm, double& dv) {
    const double t = tb.t[h];
    const double vt = m.v(t);
    dm = -(tb.p[h] * (vt * mm + m.mu * t) + tb.q[h]) / (tb.lam[h] * vt);
    dv = -2.0 * tb.p[h] / tb.lam[h] * vv;
  };
  auto rk4 = [&](auto&& rhs, int i, double& mm, double& vv) {
    double k1m, k1v, k2m, k2v, k3m, k3v, k4m, k4v;
    rhs(2 * i, mm, vv, k1m, k1v);
    rhs(2 * i + 1, mm + 0.5 * dt * k1m, vv + 0.5 * dt * k1v, k2m, k2v);
    rhs(2 * i + 1, mm + 0.5 * dt * k2m, vv + 0.5 * dt * k2v, k3m, k3v);
    rhs(2 * i + 2, mm + dt * k3m, vv + dt * k3v, k4m, k4v);
    mm += dt / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m);
    vv += dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  };

  std::vector<double> nodes, weights;
  gauss_hermite(16, nodes, weights);

  std::vector<double> ex(steps + 1), ez(steps + 1);
  double xm = 0.0, xv = 1.0, zm = 0.0, zv = 1.0;
  for (int i = 0; i <= steps; ++i) {
    const int h = 2 * i;
    const double t = tb.t[h], p = tb.p[h], q = tb.q[h], lam = tb.lam[h];
    const double ea2 = (p * p * (xv + xm * xm) + 2.0 * p * q * xm + q * q) / (lam * lam);
    ex[i] = 0.5 * lam * ea2;
    const double vt = m.v(t);
    double ew2 = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double z = zm + std::sqrt(zv) * nodes[k];
      const double w = -(p * (vt * z + m.mu * t) + q) / (lam * vt);
      ew2 += weights[k] * w * w;
    }
    ez[i] = 0.5 * lam * vt * vt * ew2;
    if (i < steps) {
      rk4(x_rhs, i, xm, xv);
      rk4(z_rhs, i, zm, zv);
    }
  }
  return {simpson_samples(ex, dt), simpson_samples(ez, dt)};
}

double w2_gaussian(double mu1, double s1, double mu2, double s2) {
  return std::sqrt((mu1 - mu2) * (mu1 - mu2) + (s1 - s2) * (s1 - s2));
}

SandwichCheck cost_sandwich(const Gaussian1DModel& m, int steps) {
  SandwichCheck sc;
  const int grid = 4096;
  sc.c_minus = sc.c_plus = m.v(0.0);
  double lam_lo = m.lambda(0.0), lam_hi = m.lambda(0.0);
  for (int i = 0; i <= grid; ++i) {
    const double t = static_cast<double>(i) / grid;
    sc.c_minus = std::min(sc.c_minus, m.v(t));
    sc.c_plus = std::max(sc.c_plus, m.v(t));
    if (i < grid) {
      lam_lo = std::min(lam_lo, m.lambda(t));
      lam_hi = std::max(lam_hi, m.lambda(t));
    }
  }
  const OracleMoments nu = exact_moments(m);
  const double cost_h = 0.5 * (nu.mean * nu.mean + nu.std * nu.std);
  const double w2 = w2_gaussian(m.mu, m.sigma, nu.mean, nu.std);
  const double cm2 = sc.c_minus * sc.c_minus, cp2 = sc.c_plus * sc.c_plus;
  sc.achieved = cost_h + energy_equivalence_check(m, steps).eulerian;
  sc.lower = cost_h + cm2 * lam_lo / (2.0 * cp2) * w2 * w2;
  sc.upper = cost_h + cp2 * lam_hi / (2.0 * cm2) * w2 * w2;
  return sc;
}

std::vector<Fig1Row> fig1_curve(double sigma, double mu, const std::vector<double>& lambdas) {
  std::vector<Fig1Row> rows;
  for (double lam : lambdas) {
    if (!(lam > 0.0)) throw std::invalid_argument("fig1_curve: lambda must be positive");
    Gaussian1DModel m{mu, sigma, WeightSchedule{lam, 0.0}};
    rows.push_back({lam, exact_moments(m).std, scheme_moments(m, Scheme::Gd).std,
                    scheme_moments(m, Scheme::Tocflow).std});
  }
  return rows;
}

}  // namespace tocflow
