#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "tocflow/fields.hpp"

namespace tocflow {

struct FMTrainConfig {
  int batch = 256;
  int iterations = 5000;
  double lr = 3e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  std::vector<double> loss;
  Vec params;
};

struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& msg, int it) : std::runtime_error(msg), iteration(it) {}
  int iteration;
};

struct LossGrad {
  double loss = 0.0;
  Vec grad;  // ordered as NeuralMLPField::flat_params
};

// Columns of x0, x1 are batch elements; t has one entry per column.
LossGrad fm_loss_batch(const NeuralMLPField& f, const Mat& x0, const Mat& x1, const Vec& t);

using TargetSampler = std::function<Vec(RngStream&)>;
std::pair<NeuralMLPField, TrainTrace> train(const TargetSampler& target, int d, const FMTrainConfig& cfg);

// RMS of b_theta - b_ref over a rectangular (x, t) grid for 1-D fields.
double field_rms_1d(const VelocityField& f, const VelocityField& ref, double x0, double x1, int nx,
                    double t0, double t1, int nt);

}  // namespace tocflow
