#include <algorithm>
#include <cmath>
#include <numbers>

#include "tocflow/experiments.hpp"

namespace tocflow {

Mat gp_kernel(const GPTrajectorySpec& spec) {
  const int n = spec.n_x;
  Mat k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dx = static_cast<double>(i - j) / (n - 1);
      k(i, j) = spec.variance * std::exp(-dx * dx / (2.0 * spec.length * spec.length));
    }
  k.diagonal().array() += spec.jitter;
  return k;
}

GaussianMixtureField gen_gp_mixture_field(const GPTrajectorySpec& spec) {
  if (spec.n_x < 2) throw std::invalid_argument("gen_gp_mixture_field: n_x must be >= 2");
  const int n = spec.n_x;
  Mat l;
  try {
    l = cholesky(gp_kernel(spec));
  } catch (const NotPositiveDefinite&) {
    throw KernelNotPSD("gen_gp_mixture_field: kernel not positive definite after jitter");
  }
  Vec m1(n), m2(n);
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / (n - 1);
    m1[i] = 10.0 * x - 5.0;
    m2[i] = -10.0 * x + 5.0;
  }
  return GaussianMixtureField({0.5, 0.5}, {m1, m2}, {l, l});
}

CorridorConstraint gen_corridors(const GPTrajectorySpec& spec, RngStream& rng, const CorridorSpec& cs) {
  const int n = spec.n_x;
  const int smin = cs.span_min > 0 ? cs.span_min : std::max(1, n / 16);
  const int smax = cs.span_max > 0 ? cs.span_max : std::max(smin, n / 8);
  const int seg = n / cs.n_spans;
  if (seg < smax) throw std::invalid_argument("gen_corridors: grid too small for the span layout");
  const double range = cs.range_hi - cs.range_lo;
  std::vector<CorridorSpan> spans;
  for (int s = 0; s < cs.n_spans; ++s) {
    const int len = smin + static_cast<int>(std::floor(rng.uniform() * (smax - smin + 1)));
    const int room = seg - len;
    const int start = s * seg + static_cast<int>(std::floor(rng.uniform() * (room + 1)));
    CorridorSpan sp;
    for (int i = 0; i < len; ++i) sp.index.push_back(start + i);
    const double w = rng.uniform(cs.width_min, cs.width_max) * range;
    const double c = rng.uniform(cs.range_lo + w / 2, cs.range_hi - w / 2);
    sp.lower = c - w / 2;
    sp.upper = c + w / 2;
    spans.push_back(std::move(sp));
  }
  return CorridorConstraint(n, std::move(spans));
}

double kink_metric(const Vec& f) {
  double k = 0.0;
  for (Eigen::Index i = 1; i + 1 < f.size(); ++i)
    k = std::max(k, std::abs(f[i + 1] - 2.0 * f[i] + f[i - 1]));
  return k;
}

KLBasis darcy_kl_basis(const DarcyGenSpec& spec) {
  const int n = spec.n, m = n * n;
  if (spec.modes < 1 || spec.modes > m) throw std::invalid_argument("darcy_kl_basis: bad mode count");
  const double dx = 1.0 / (n - 1);
  Mat k(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      const double dy = (a / n - b / n) * dx, dxx = (a % n - b % n) * dx;
      k(a, b) = std::exp(-std::sqrt(dy * dy + dxx * dxx) / spec.length);
    }
  Eigen::SelfAdjointEigenSolver<Mat> es(k);
  KLBasis basis;
  basis.phi = es.eigenvectors().rightCols(spec.modes).rowwise().reverse();
  basis.sqrt_lambda = es.eigenvalues().tail(spec.modes).reverse().cwiseMax(0.0).cwiseSqrt();
  return basis;
}

PressureSolve darcy_pressure_solve(const DarcyConstraint& c, const Vec& k, double tol) {
  const int m = c.n() * c.n();
  Vec rhs = Vec::Zero(m);
  for (int q = 0; q < m; ++q)
    if (!c.is_boundary(q / c.n(), q % c.n())) rhs[q] = c.source()[q];
  // Normal equations of the stacked system [A; 1^T/m] p = [rhs; 0].
  const double wm = 1.0 / m;
  auto normal = [&](const Vec& p) {
    Vec out = c.pressure_operator_t(k, c.pressure_operator(k, p));
    out.array() += wm * wm * p.sum();
    return out;
  };
  const Vec b = c.pressure_operator_t(k, rhs);
  const CgResult cg = cg_solve(normal, b, tol, 50 * m);
  PressureSolve ps;
  ps.p = (cg.x.array() - cg.x.mean()).matrix();
  ps.converged = cg.converged;
  ps.iterations = cg.iterations;
  return ps;
}

Vec darcy_state_from_z(const DarcyGenSpec& spec, const KLBasis& basis, const DarcyConstraint& c,
                       const Vec& z, bool* converged) {
  const int m = spec.n * spec.n;
  const Vec g = basis.phi * basis.sqrt_lambda.cwiseProduct(z);
  const PressureSolve ps = darcy_pressure_solve(c, g.array().exp().matrix(), spec.cg_tol);
  if (converged) *converged = ps.converged;
  Vec state(2 * m);
  state.head(m) = g;
  state.tail(m) = ps.p;
  return state;
}

std::vector<Vec> gen_darcy_pairs(const DarcyGenSpec& spec, RngStream& rng, int count) {
  if (count < 1) throw std::invalid_argument("gen_darcy_pairs: count must be >= 1");
  const KLBasis basis = darcy_kl_basis(spec);
  const DarcyConstraint c(spec.n, spec.source);
  std::vector<Vec> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 4 * count + 16) throw std::runtime_error("gen_darcy_pairs: pressure solves keep stagnating");
    bool ok = false;
    Vec s = darcy_state_from_z(spec, basis, c, rng.normal_vec(spec.modes), &ok);
    if (ok) out.push_back(std::move(s));
  }
  return out;
}

Vec gen_spectrum_field(const SpectrumGenSpec& spec, RngStream& rng) {
  const int n = spec.n;
  if (n < 4 || (n & (n - 1)) != 0) throw ShapeError("gen_spectrum_field: n must be a power of two");
  auto fold = [n](int i) { return i < n / 2 ? i : i - n; };
  auto shell = [&](int i, int j) {
    const double kx = fold(j), ky = fold(i);
    const double r = std::sqrt(kx * kx + ky * ky);
    const int s = static_cast<int>(std::floor(r));
    return (r == 0.0 || s >= n / 2) ? -1 : s;
  };
  std::vector<int> pop(n / 2, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (shell(i, j) >= 1) ++pop[shell(i, j)];
  CMat hat = CMat::Zero(n, n);
  std::vector<char> done(n * n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int s = shell(i, j);
      if (s < 1 || done[i * n + j]) continue;
      const int ci = (n - i) % n, cj = (n - j) % n;
      const double kx = fold(j), ky = fold(i);
      const double amp = std::sqrt(kx * kx + ky * ky) *
                         std::sqrt(2.0 * spec.amplitude * std::pow(s, -spec.beta) / pop[s]);
      const double ph = 2.0 * std::numbers::pi * rng.uniform();
      hat(i, j) = std::polar(amp, ph);
      hat(ci, cj) = std::polar(amp, -ph);
      done[i * n + j] = done[ci * n + cj] = 1;
    }
  }
  const CMat back = dft2(hat, FftDir::Inverse);
  Vec out(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out[i * n + j] = back(i, j).real() / (static_cast<double>(n) * n);
  return out;
}

GaussianMixtureField fit_gaussian_reference(const std::vector<Vec>& samples, double jitter) {
  if (samples.size() < 2) throw std::invalid_argument("fit_gaussian_reference: need at least 2 samples");
  const int d = static_cast<int>(samples[0].size());
  const int cnt = static_cast<int>(samples.size());
  Vec mean = Vec::Zero(d);
  for (const auto& s : samples) mean += s;
  mean /= cnt;
  Mat xc(d, cnt);
  for (int i = 0; i < cnt; ++i) xc.col(i) = (samples[i] - mean) / std::sqrt(cnt - 1.0);

  if (cnt - 1 >= d) {
    const Mat cov = xc * xc.transpose();
    for (double jit = jitter; jit <= 1e-2 * (1 + 1e-9); jit *= 10.0) {
      Mat s = cov;
      s.diagonal().array() += jit;
      try {
        return GaussianMixtureField({1.0}, {mean}, {cholesky(s)});
      } catch (const NotPositiveDefinite&) {
      }
    }
    throw NotPositiveDefinite("fit_gaussian_reference: covariance singular after jitter 1e-2");
  }
  // Fewer samples than dimensions: eigenpairs of X X^T from the Gram matrix X^T X, so the
  // covariance is held as a rank-(cnt-1) part plus the isotropic jitter floor.
  Eigen::SelfAdjointEigenSolver<Mat> es(xc.transpose() * xc);
  const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
  std::vector<int> keep;
  for (int i = 0; i < cnt; ++i)
    if (es.eigenvalues()[i] > 1e-12 * top && es.eigenvalues()[i] > 0.0) keep.push_back(i);
  MixtureComponent c;
  c.weight = 1.0;
  c.mean = mean;
  c.basis.resize(d, static_cast<Eigen::Index>(keep.size()));
  c.eigvals.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t q = 0; q < keep.size(); ++q) {
    const double lam = es.eigenvalues()[keep[q]];
    Vec u = xc * es.eigenvectors().col(keep[q]) / std::sqrt(lam);
    c.basis.col(q) = u.normalized();
    c.eigvals[q] = lam + jitter;
  }
  c.floor = jitter;
  return GaussianMixtureField(std::vector<MixtureComponent>{c});
}

}  // namespace tocflow
