#include "tocflow/fm.hpp"

#include <cmath>

namespace tocflow {

LossGrad fm_loss_batch(const NeuralMLPField& f, const Mat& x0, const Mat& x1, const Vec& t) {
  const int d = f.dim();
  const Eigen::Index bsz = x0.cols();
  if (x0.rows() != d || x1.rows() != d || x1.cols() != bsz || t.size() != bsz)
    throw ShapeError("fm_loss_batch: batch shapes differ");
  const auto& w = f.weights();
  const auto& b = f.biases();
  const std::size_t nl = w.size();

  Mat h(d + 1, bsz);
  for (Eigen::Index j = 0; j < bsz; ++j) {
    h.col(j).head(d) = (1.0 - t[j]) * x0.col(j) + t[j] * x1.col(j);
    h(d, j) = t[j];
  }
  std::vector<Mat> hs{h}, zs;
  for (std::size_t l = 0; l + 1 < nl; ++l) {
    Mat z = (w[l] * hs.back()).colwise() + b[l];
    Mat a = z.unaryExpr([&](double v) { return act_value(f.activation(), v); });
    zs.push_back(std::move(z));
    hs.push_back(std::move(a));
  }
  const Mat out = (w[nl - 1] * hs.back()).colwise() + b[nl - 1];
  const Mat r = out - (x1 - x0);
  LossGrad lg;
  lg.loss = 0.5 * r.squaredNorm() / static_cast<double>(bsz);

  std::vector<Mat> gw(nl);
  std::vector<Vec> gb(nl);
  Mat g = r / static_cast<double>(bsz);
  for (std::size_t l = nl; l-- > 0;) {
    gw[l] = g * hs[l].transpose();
    gb[l] = g.rowwise().sum();
    if (l == 0) break;
    Mat gh = w[l].transpose() * g;
    const Mat dz = zs[l - 1].unaryExpr([&](double v) { return act_deriv(f.activation(), v); });
    g = gh.cwiseProduct(dz);
  }
  lg.grad.resize(f.num_params());
  int o = 0;
  for (std::size_t l = 0; l < nl; ++l) {
    lg.grad.segment(o, gw[l].size()) = Eigen::Map<const Vec>(gw[l].data(), gw[l].size());
    o += static_cast<int>(gw[l].size());
    lg.grad.segment(o, gb[l].size()) = gb[l];
    o += static_cast<int>(gb[l].size());
  }
  return lg;
}

std::pair<NeuralMLPField, TrainTrace> train(const TargetSampler& target, int d, const FMTrainConfig& cfg) {
  if (cfg.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
  if (!(cfg.lr >= 0.0)) throw std::invalid_argument("train: lr must be nonnegative");
  RngStream rng(cfg.seed, 0);
  NeuralMLPField f(d, cfg.hidden, cfg.activation);
  f.init_xavier(rng);
  Vec p = f.flat_params();
  Vec m1 = Vec::Zero(p.size()), m2 = Vec::Zero(p.size());
  TrainTrace trace;
  trace.loss.reserve(cfg.iterations);
  Mat x0(d, cfg.batch), x1(d, cfg.batch);
  Vec t(cfg.batch);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int j = 0; j < cfg.batch; ++j) {
      x0.col(j) = rng.normal_vec(d);
      x1.col(j) = target(rng);
      t[j] = rng.uniform();
    }
    const LossGrad lg = fm_loss_batch(f, x0, x1, t);
    if (!std::isfinite(lg.loss) || !lg.grad.allFinite())
      throw TrainingDiverged("train: non-finite loss at iteration " + std::to_string(it), it);
    trace.loss.push_back(lg.loss);
    if (cfg.lr == 0.0) continue;
    m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * lg.grad;
    m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * lg.grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, it + 1);
    const double c2 = 1.0 - std::pow(cfg.beta2, it + 1);
    p.array() -= cfg.lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.adam_eps);
    f.set_flat_params(p);
  }
  trace.params = f.flat_params();
  return {std::move(f), std::move(trace)};
}

double field_rms_1d(const VelocityField& f, const VelocityField& ref, double x0, double x1, int nx,
                    double t0, double t1, int nt) {
  double acc = 0.0;
  Vec x(1);
  for (int i = 0; i < nx; ++i) {
    x[0] = x0 + (x1 - x0) * i / (nx - 1);
    for (int j = 0; j < nt; ++j) {
      const double t = t0 + (t1 - t0) * j / (nt - 1);
      const double diff = f.eval(x, t)[0] - ref.eval(x, t)[0];
      acc += diff * diff;
    }
  }
  return std::sqrt(acc / (static_cast<double>(nx) * nt));
}

}  // namespace tocflow
