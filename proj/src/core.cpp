#include "tocflow/core.hpp"

#include <algorithm>
#include <cmath>

namespace tocflow {

namespace {
std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  std::uint64_t s = seed ^ splitmix(stream);
  std::uint64_t mixed = splitmix(s);
  engine_.seed(mixed);
}

Vec RngStream::normal_vec(int d) {
  Vec z(d);
  for (int i = 0; i < d; ++i) z[i] = normal();
  return z;
}

Mat cholesky(const Mat& a) {
  if (a.rows() != a.cols()) throw ShapeError("cholesky: matrix not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("cholesky: matrix not symmetric");
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("cholesky: non-positive pivot");
  Mat l = llt.matrixL();
  return l;
}

CgResult cg_solve(const LinearMap& apply, const Vec& b, double tol, int max_iter) {
  CgResult res;
  res.x = Vec::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  Vec r = b;
  Vec p = r;
  double rr = r.squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    Vec ap = apply(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap) || pap <= 0.0) {
      res.breakdown = true;
      return res;
    }
    const double alpha = rr / pap;
    Vec xn = res.x + alpha * p;
    if (!xn.allFinite()) {
      res.breakdown = true;
      return res;
    }
    res.x = std::move(xn);
    r -= alpha * ap;
    res.iterations = it + 1;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= tol * bnorm) {
      res.converged = true;
      return res;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return res;
}

double simpson_quad(const std::function<double(double)>& f, double a, double b, int n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("simpson_quad: n must be even and >= 2");
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

Vec gauss_sample(RngStream& rng, const Vec& mean, const Mat& chol) {
  if (chol.rows() != mean.size()) throw ShapeError("gauss_sample: dimension mismatch");
  Vec z = rng.normal_vec(static_cast<int>(chol.cols()));
  return mean + chol.triangularView<Eigen::Lower>() * z;
}

double grad_check(const std::function<double(const Vec&)>& f,
                  const std::function<Vec(const Vec&)>& grad, const Vec& x, double eps) {
  const Vec g = grad(x);
  Vec fd(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + eps;
    const double fp = f(xp);
    xp[i] = x[i] - eps;
    const double fm = f(xp);
    xp[i] = x[i];
    fd[i] = (fp - fm) / (2.0 * eps);
  }
  const double fmax = fd.cwiseAbs().maxCoeff();
  double err = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double diff = std::abs(g[i] - fd[i]);
    const double denom = fmax > 0.0 ? std::max(std::abs(fd[i]), 1e-3 * fmax) : 1.0;
    err = std::max(err, diff / denom);
  }
  return err;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - lo;
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace tocflow
