#include <cmath>

#include "tocflow/fields.hpp"

namespace tocflow {

NeuralMLPField::NeuralMLPField(int d, const std::vector<int>& hidden, Activation act)
    : dim_(d), act_(act) {
  if (d < 1) throw std::invalid_argument("NeuralMLPField: dimension must be positive");
  int in = d + 1;
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("NeuralMLPField: hidden width must be positive");
    w_.push_back(Mat::Zero(h, in));
    b_.push_back(Vec::Zero(h));
    in = h;
  }
  w_.push_back(Mat::Zero(d, in));
  b_.push_back(Vec::Zero(d));
}

NeuralMLPField::NeuralMLPField(std::vector<Mat> weights, std::vector<Vec> biases, Activation act)
    : w_(std::move(weights)), b_(std::move(biases)), act_(act) {
  if (w_.empty() || w_.size() != b_.size()) throw ShapeError("NeuralMLPField: layer lists differ");
  dim_ = static_cast<int>(w_.back().rows());
  if (w_.front().cols() != dim_ + 1) throw ShapeError("NeuralMLPField: input width must be d+1");
  for (std::size_t l = 0; l < w_.size(); ++l) {
    if (b_[l].size() != w_[l].rows()) throw ShapeError("NeuralMLPField: bias shape");
    if (l > 0 && w_[l].cols() != w_[l - 1].rows()) throw ShapeError("NeuralMLPField: layer chain");
  }
}

void NeuralMLPField::init_xavier(RngStream& rng) {
  for (std::size_t l = 0; l < w_.size(); ++l) {
    const double a = std::sqrt(6.0 / static_cast<double>(w_[l].rows() + w_[l].cols()));
    for (Eigen::Index i = 0; i < w_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < w_[l].cols(); ++j) w_[l](i, j) = rng.uniform(-a, a);
    b_[l].setZero();
  }
}

int NeuralMLPField::num_params() const {
  int n = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) n += static_cast<int>(w_[l].size() + b_[l].size());
  return n;
}

Vec NeuralMLPField::flat_params() const {
  Vec p(num_params());
  int o = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    p.segment(o, w_[l].size()) = Eigen::Map<const Vec>(w_[l].data(), w_[l].size());
    o += static_cast<int>(w_[l].size());
    p.segment(o, b_[l].size()) = b_[l];
    o += static_cast<int>(b_[l].size());
  }
  return p;
}

void NeuralMLPField::set_flat_params(const Vec& p) {
  if (p.size() != num_params()) throw ShapeError("NeuralMLPField: parameter count");
  int o = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::Map<Vec>(w_[l].data(), w_[l].size()) = p.segment(o, w_[l].size());
    o += static_cast<int>(w_[l].size());
    b_[l] = p.segment(o, b_[l].size());
    o += static_cast<int>(b_[l].size());
  }
}

Vec mlp_eval_and_products(const NeuralMLPField& f, const Vec& x, double t, FieldMode mode,
                          const Vec& seed) {
  const auto& w = f.weights();
  const auto& b = f.biases();
  const std::size_t nl = w.size();
  const int d = f.dim();
  if (x.size() != d) throw ShapeError("NeuralMLPField: state dimension mismatch");
  Vec h(d + 1);
  h.head(d) = x;
  h[d] = t;
  Vec dh;
  if (mode == FieldMode::Jvp) {
    dh = Vec::Zero(d + 1);
    dh.head(d) = seed;
  }
  std::vector<Vec> pre;
  pre.reserve(nl);
  for (std::size_t l = 0; l + 1 < nl; ++l) {
    Vec z = w[l] * h + b[l];
    Vec hn(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) hn[i] = act_value(f.activation(), z[i]);
    if (mode == FieldMode::Jvp) {
      Vec dz = w[l] * dh;
      for (Eigen::Index i = 0; i < z.size(); ++i) dz[i] *= act_deriv(f.activation(), z[i]);
      dh = std::move(dz);
    }
    pre.push_back(std::move(z));
    h = std::move(hn);
  }
  if (mode == FieldMode::Eval) return w[nl - 1] * h + b[nl - 1];
  if (mode == FieldMode::Jvp) return w[nl - 1] * dh;
  Vec g = w[nl - 1].transpose() * seed;
  for (std::size_t l = nl - 1; l-- > 0;) {
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] *= act_deriv(f.activation(), pre[l][i]);
    g = w[l].transpose() * g;
  }
  return g.head(d);
}

Vec NeuralMLPField::eval(const Vec& x, double t) const {
  return mlp_eval_and_products(*this, x, t, FieldMode::Eval, Vec());
}
Vec NeuralMLPField::jvp(const Vec& x, double t, const Vec& v) const {
  return mlp_eval_and_products(*this, x, t, FieldMode::Jvp, v);
}
Vec NeuralMLPField::vjp(const Vec& x, double t, const Vec& u) const {
  return mlp_eval_and_products(*this, x, t, FieldMode::Vjp, u);
}

}  // namespace tocflow
