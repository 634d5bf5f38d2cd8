#pragma once

#include "tocflow/core.hpp"

#include <memory>
#include <string>
#include <vector>

namespace tocflow {

class Constraint;

class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual int dim() const = 0;
  virtual Vec eval(const Vec& x, double t) const = 0;
  virtual Vec jvp(const Vec& x, double t, const Vec& v) const = 0;
  virtual Vec vjp(const Vec& x, double t, const Vec& u) const = 0;
};

using FieldPtr = std::shared_ptr<const VelocityField>;

// b(x, t) = c, independent of x and t.
class ConstantField : public VelocityField {
 public:
  explicit ConstantField(Vec c) : c_(std::move(c)) {}
  int dim() const override { return static_cast<int>(c_.size()); }
  Vec eval(const Vec&, double) const override { return c_; }
  Vec jvp(const Vec&, double, const Vec& v) const override { return Vec::Zero(v.size()); }
  Vec vjp(const Vec&, double, const Vec& u) const override { return Vec::Zero(u.size()); }

 private:
  Vec c_;
};

// b(x, t) = A x with a fixed matrix A.
class LinearField : public VelocityField {
 public:
  explicit LinearField(Mat a) : a_(std::move(a)) {}
  int dim() const override { return static_cast<int>(a_.rows()); }
  Vec eval(const Vec& x, double) const override { return a_ * x; }
  Vec jvp(const Vec&, double, const Vec& v) const override { return a_ * v; }
  Vec vjp(const Vec&, double, const Vec& u) const override { return a_.transpose() * u; }

 private:
  Mat a_;
};

// Transport of N(0,1) to N(mu, sigma^2) along the linear interpolant.
class Affine1DField : public VelocityField {
 public:
  Affine1DField(double mu, double sigma);
  int dim() const override { return 1; }
  Vec eval(const Vec& x, double t) const override;
  Vec jvp(const Vec& x, double t, const Vec& v) const override;
  Vec vjp(const Vec& x, double t, const Vec& u) const override;

  double v(double t) const;
  double alpha(double t) const;
  double beta(double t) const;
  // Phi_{t->1}(x) and its derivative.
  double flow_map(double x, double t) const;
  double flow_jacobian(double t) const;
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }

 private:
  double mu_, sigma_;
};

// One mixture component with covariance S = U diag(ev) U^T + floor (I - U U^T).
struct MixtureComponent {
  double weight = 1.0;
  Vec mean;
  Mat basis;  // d x r, orthonormal columns
  Vec eigvals;
  double floor = 0.0;
};

class GaussianMixtureField : public VelocityField {
 public:
  static constexpr double kEps = 1e-10;

  // Components given by lower-triangular factors L_j with S_j = L_j L_j^T.
  GaussianMixtureField(const std::vector<double>& weights, const std::vector<Vec>& means,
                       const std::vector<Mat>& chol_factors);
  explicit GaussianMixtureField(std::vector<MixtureComponent> comps);

  int dim() const override { return dim_; }
  Vec eval(const Vec& x, double t) const override;
  Vec jvp(const Vec& x, double t, const Vec& v) const override;
  Vec vjp(const Vec& x, double t, const Vec& u) const override;

  Vec posterior(const Vec& x, double t) const;
  // Posterior weights from log-densities shifted by a constant (for stabilization checks).
  Vec posterior_shifted(const Vec& x, double t, double shift) const;
  Vec sample(RngStream& rng) const;
  const std::vector<MixtureComponent>& components() const { return comps_; }
  Mat covariance(std::size_t j) const;

 private:
  struct Local;
  Local local(const Vec& x, double t) const;
  int dim_ = 0;
  std::vector<MixtureComponent> comps_;
};

enum class Activation { Tanh, Silu };
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Input [x; t], hidden layers with activation, linear output layer.
class NeuralMLPField : public VelocityField {
 public:
  NeuralMLPField(int d, const std::vector<int>& hidden, Activation act);
  NeuralMLPField(std::vector<Mat> weights, std::vector<Vec> biases, Activation act);

  int dim() const override { return dim_; }
  Vec eval(const Vec& x, double t) const override;
  Vec jvp(const Vec& x, double t, const Vec& v) const override;
  Vec vjp(const Vec& x, double t, const Vec& u) const override;

  void init_xavier(RngStream& rng);
  std::vector<Mat>& weights() { return w_; }
  std::vector<Vec>& biases() { return b_; }
  const std::vector<Mat>& weights() const { return w_; }
  const std::vector<Vec>& biases() const { return b_; }
  Activation activation() const { return act_; }
  int num_params() const;
  Vec flat_params() const;
  void set_flat_params(const Vec& p);

 private:
  int dim_;
  std::vector<Mat> w_;
  std::vector<Vec> b_;
  Activation act_;
};

enum class FieldMode { Eval, Jvp, Vjp };
Vec mlp_eval_and_products(const NeuralMLPField& f, const Vec& x, double t, FieldMode mode,
                          const Vec& seed);

double act_value(Activation a, double z);
double act_deriv(Activation a, double z);

struct LookaheadDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Explicit Euler unroll of the reference ODE from t to 1 with cached states.
struct Unroll {
  std::vector<Vec> xs;
  std::vector<double> ts;
  double h = 0.0;
  Vec end;
};

Unroll unroll(const VelocityField& f, const Vec& x, double t, int k);
Vec lookahead_flow(const VelocityField& f, const Vec& x, double t, int k);
Vec reverse_chain(const VelocityField& f, const Unroll& u, Vec seed);
Vec forward_chain(const VelocityField& f, const Unroll& u, Vec v);
Vec pullback_grad(const VelocityField& f, const Constraint& c, const Vec& x, double t, int k);
Vec forward_sensitivity(const VelocityField& f, const Vec& x, double t, int k, const Vec& v);

}  // namespace tocflow
