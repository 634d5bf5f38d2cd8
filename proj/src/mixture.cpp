#include <cmath>
#include <numbers>

#include "tocflow/fields.hpp"

namespace tocflow {

namespace {

MixtureComponent component_from_cov(double w, const Vec& mean, const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  MixtureComponent c;
  c.weight = w;
  c.mean = mean;
  c.basis = es.eigenvectors();
  c.eigvals = es.eigenvalues().cwiseMax(0.0);
  c.floor = 0.0;
  return c;
}

// y -> g_f y + U ((g - g_f) .* U^T y)
Vec apply_spectral(const MixtureComponent& c, const Vec& g, double gf, const Vec& y) {
  const Vec coeff = c.basis.transpose() * y;
  if (c.basis.cols() == c.basis.rows()) return c.basis * g.cwiseProduct(coeff);
  return c.basis * (g.array() - gf).matrix().cwiseProduct(coeff) + gf * y;
}

}  // namespace

GaussianMixtureField::GaussianMixtureField(const std::vector<double>& weights,
                                           const std::vector<Vec>& means,
                                           const std::vector<Mat>& chol_factors) {
  if (weights.size() != means.size() || weights.size() != chol_factors.size() || weights.empty())
    throw ShapeError("GaussianMixtureField: component list sizes differ");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("GaussianMixtureField: weights must be positive");
    total += w;
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const Mat& l = chol_factors[j];
    if (l.rows() != means[j].size() || l.cols() != means[j].size())
      throw ShapeError("GaussianMixtureField: factor shape mismatch");
    Mat lo = l.triangularView<Eigen::Lower>();
    comps_.push_back(component_from_cov(weights[j] / total, means[j], lo * lo.transpose()));
  }
  dim_ = static_cast<int>(means[0].size());
}

GaussianMixtureField::GaussianMixtureField(std::vector<MixtureComponent> comps)
    : comps_(std::move(comps)) {
  if (comps_.empty()) throw ShapeError("GaussianMixtureField: no components");
  dim_ = static_cast<int>(comps_[0].mean.size());
  double total = 0.0;
  for (const auto& c : comps_) {
    if (c.mean.size() != dim_ || c.basis.rows() != dim_ || c.basis.cols() != c.eigvals.size())
      throw ShapeError("GaussianMixtureField: component shape mismatch");
    if (!(c.weight > 0.0)) throw std::invalid_argument("GaussianMixtureField: weights must be positive");
    total += c.weight;
  }
  for (auto& c : comps_) c.weight /= total;
}

Mat GaussianMixtureField::covariance(std::size_t j) const {
  const auto& c = comps_.at(j);
  Mat s = c.basis * c.eigvals.asDiagonal() * c.basis.transpose();
  if (c.basis.cols() < dim_)
    s += c.floor * (Mat::Identity(dim_, dim_) - c.basis * c.basis.transpose());
  return s;
}

struct GaussianMixtureField::Local {
  std::vector<double> logd;
  Vec p;
  std::vector<Vec> c, a;
  std::vector<Vec> bdiag;
  std::vector<double> bfloor;
};

GaussianMixtureField::Local GaussianMixtureField::local(const Vec& x, double t) const {
  if (x.size() != dim_) throw ShapeError("GaussianMixtureField: state dimension mismatch");
  Local l;
  const std::size_t m = comps_.size();
  l.logd.resize(m);
  l.c.resize(m);
  l.a.resize(m);
  l.bdiag.resize(m);
  l.bfloor.resize(m);
  const double a2 = (1.0 - t) * (1.0 - t);
  const double t2 = t * t;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& c = comps_[j];
    const Vec delta = x - t * c.mean;
    const Vec coeff = c.basis.transpose() * delta;
    const Vec ve = (a2 + t2 * c.eigvals.array() + kEps).matrix();
    const double vf = a2 + t2 * c.floor + kEps;
    const Vec be = ((t * c.eigvals.array() - (1.0 - t)) / ve.array()).matrix();
    const double bf = (t * c.floor - (1.0 - t)) / vf;
    const Vec vinv_coeff = coeff.cwiseQuotient(ve);
    const bool lowrank = c.basis.cols() < dim_;

    double quad = coeff.dot(vinv_coeff);
    double logdet = ve.array().log().sum();
    Vec a = -(c.basis * vinv_coeff);
    Vec bd = c.basis * be.cwiseProduct(coeff);
    if (lowrank) {
      const Vec perp = delta - c.basis * coeff;
      quad += perp.squaredNorm() / vf;
      logdet += (dim_ - c.basis.cols()) * std::log(vf);
      a -= perp / vf;
      bd += bf * perp;
    }
    l.logd[j] = std::log(c.weight) -
                0.5 * (dim_ * std::log(2.0 * std::numbers::pi) + logdet + quad);
    l.a[j] = std::move(a);
    l.c[j] = c.mean + bd;
    l.bdiag[j] = be;
    l.bfloor[j] = bf;
  }
  double mx = l.logd[0];
  for (double v : l.logd) mx = std::max(mx, v);
  l.p.resize(m);
  double z = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    l.p[j] = std::exp(l.logd[j] - mx);
    z += l.p[j];
  }
  l.p /= z;
  return l;
}

Vec GaussianMixtureField::posterior(const Vec& x, double t) const { return local(x, t).p; }

Vec GaussianMixtureField::posterior_shifted(const Vec& x, double t, double shift) const {
  Local l = local(x, t);
  double mx = l.logd[0] + shift;
  for (double v : l.logd) mx = std::max(mx, v + shift);
  Vec p(l.logd.size());
  for (std::size_t j = 0; j < l.logd.size(); ++j) p[j] = std::exp(l.logd[j] + shift - mx);
  return p / p.sum();
}

Vec GaussianMixtureField::eval(const Vec& x, double t) const {
  Local l = local(x, t);
  Vec out = Vec::Zero(dim_);
  for (std::size_t j = 0; j < comps_.size(); ++j) out += l.p[j] * l.c[j];
  return out;
}

Vec GaussianMixtureField::jvp(const Vec& x, double t, const Vec& v) const {
  Local l = local(x, t);
  Vec abar = Vec::Zero(dim_);
  for (std::size_t j = 0; j < comps_.size(); ++j) abar += l.p[j] * l.a[j];
  Vec out = Vec::Zero(dim_);
  for (std::size_t j = 0; j < comps_.size(); ++j) {
    out += l.p[j] * apply_spectral(comps_[j], l.bdiag[j], l.bfloor[j], v);
    if (comps_.size() > 1) out += l.p[j] * (l.a[j] - abar).dot(v) * l.c[j];
  }
  return out;
}

Vec GaussianMixtureField::vjp(const Vec& x, double t, const Vec& u) const {
  Local l = local(x, t);
  Vec abar = Vec::Zero(dim_);
  for (std::size_t j = 0; j < comps_.size(); ++j) abar += l.p[j] * l.a[j];
  Vec out = Vec::Zero(dim_);
  for (std::size_t j = 0; j < comps_.size(); ++j) {
    out += l.p[j] * apply_spectral(comps_[j], l.bdiag[j], l.bfloor[j], u);
    if (comps_.size() > 1) out += l.p[j] * l.c[j].dot(u) * (l.a[j] - abar);
  }
  return out;
}

Vec GaussianMixtureField::sample(RngStream& rng) const {
  const double r = rng.uniform();
  std::size_t j = 0;
  double acc = comps_[0].weight;
  while (r > acc && j + 1 < comps_.size()) acc += comps_[++j].weight;
  const auto& c = comps_[j];
  const Vec zr = rng.normal_vec(static_cast<int>(c.eigvals.size()));
  Vec x = c.mean + c.basis * c.eigvals.cwiseSqrt().cwiseProduct(zr);
  if (c.basis.cols() < dim_ && c.floor > 0.0) {
    const Vec zd = rng.normal_vec(dim_);
    x += std::sqrt(c.floor) * (zd - c.basis * (c.basis.transpose() * zd));
  }
  return x;
}

}  // namespace tocflow
