#include <cmath>

#include "tocflow/constraints.hpp"

namespace tocflow {

namespace {

Mat to_grid(const Vec& x, int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = x[i * n + j];
  return m;
}

int fold(int i, int n) { return i < n / 2 ? i : i - n; }

}  // namespace

SpectrumConstraint::SpectrumConstraint(int n, int kmin, int kmax, SpectrumConvention conv)
    : n_(n), kmin_(kmin), kmax_(kmax), conv_(conv) {
  if (n < 4 || (n & (n - 1)) != 0) throw ShapeError("SpectrumConstraint: n must be a power of two >= 4");
  if (kmin < 1 || kmax >= n / 2 || kmin > kmax) throw std::invalid_argument("SpectrumConstraint: bad band");
  shell_.assign(n * n, -1);
  wgt_.assign(n * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double ky = fold(i, n), kx = fold(j, n);
      const double k2 = kx * kx + ky * ky;
      if (k2 == 0.0) continue;
      const int s = static_cast<int>(std::floor(std::sqrt(k2)));
      if (s < 1 || s >= n / 2) continue;
      shell_[i * n + j] = s;
      wgt_[i * n + j] = conv == SpectrumConvention::Velocity ? 1.0 / k2 : 1.0;
    }
  }
}

CMat SpectrumConstraint::forward(const Vec& x) const {
  if (x.size() != n_ * n_) throw ShapeError("SpectrumConstraint: field size mismatch");
  return dft2(to_grid(x, n_), FftDir::Forward);
}

Vec SpectrumConstraint::energy_spectrum(const Vec& omega) const {
  const CMat w = forward(omega);
  Vec e = Vec::Zero(n_ / 2);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const int q = i * n_ + j;
      if (shell_[q] >= 0) e[shell_[q]] += 0.5 * std::norm(w(i, j)) * wgt_[q];
    }
  return e;
}

// d h / d E_k for shells in the band, zero elsewhere.
Vec SpectrumConstraint::shell_grad(const Vec& e) const {
  const int nk = kmax_ - kmin_ + 1;
  Vec c(nk);
  for (int k = kmin_; k <= kmax_; ++k)
    c[k - kmin_] = std::log(std::max(e[k], kFloor)) + (5.0 / 3.0) * std::log(static_cast<double>(k));
  const double mu = c.mean();
  Vec g = Vec::Zero(e.size());
  for (int k = kmin_; k <= kmax_; ++k)
    if (e[k] > kFloor) g[k] = 2.0 / nk * (c[k - kmin_] - mu) / e[k];
  return g;
}

Vec SpectrumConstraint::residual(const Vec& x) const {
  const Vec e = energy_spectrum(x);
  const int nk = kmax_ - kmin_ + 1;
  Vec c(nk);
  for (int k = kmin_; k <= kmax_; ++k)
    c[k - kmin_] = std::log(std::max(e[k], kFloor)) + (5.0 / 3.0) * std::log(static_cast<double>(k));
  Vec r(1);
  r[0] = (c.array() - c.mean()).square().mean();
  return r;
}

Vec SpectrumConstraint::jvp(const Vec& x, const Vec& v) const {
  const CMat w = forward(x);
  const CMat dw = dft2(to_grid(v, n_), FftDir::Forward);
  Vec e = Vec::Zero(n_ / 2), de = Vec::Zero(n_ / 2);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const int q = i * n_ + j;
      if (shell_[q] < 0) continue;
      e[shell_[q]] += 0.5 * std::norm(w(i, j)) * wgt_[q];
      de[shell_[q]] += std::real(std::conj(w(i, j)) * dw(i, j)) * wgt_[q];
    }
  Vec r(1);
  r[0] = shell_grad(e).dot(de);
  return r;
}

Vec SpectrumConstraint::vjp(const Vec& x, const Vec& u) const {
  const CMat w = forward(x);
  Vec e = Vec::Zero(n_ / 2);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const int q = i * n_ + j;
      if (shell_[q] >= 0) e[shell_[q]] += 0.5 * std::norm(w(i, j)) * wgt_[q];
    }
  const Vec g = shell_grad(e) * u[0];
  CMat s = CMat::Zero(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const int q = i * n_ + j;
      if (shell_[q] >= 0) s(i, j) = g[shell_[q]] * wgt_[q] * w(i, j);
    }
  const CMat back = dft2(s, FftDir::Inverse);
  Vec out(n_ * n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) out[i * n_ + j] = back(i, j).real();
  return out;
}

Vec energy_spectrum(const SpectrumConstraint& c, const Vec& omega) { return c.energy_spectrum(omega); }

double spectrum_residual(const SpectrumConstraint& c, const Vec& omega) { return c.residual(omega)[0]; }

}  // namespace tocflow
