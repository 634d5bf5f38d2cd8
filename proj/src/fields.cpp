#include "tocflow/fields.hpp"

#include <cmath>

namespace tocflow {

Affine1DField::Affine1DField(double mu, double sigma) : mu_(mu), sigma_(sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("Affine1DField: sigma must be positive");
}

double Affine1DField::v(double t) const {
  return std::sqrt((1.0 - t) * (1.0 - t) + t * t * sigma_ * sigma_);
}

double Affine1DField::alpha(double t) const {
  const double vv = (1.0 - t) * (1.0 - t) + t * t * sigma_ * sigma_;
  return (t * sigma_ * sigma_ - (1.0 - t)) / vv;
}

double Affine1DField::beta(double t) const { return mu_ * (1.0 - t * alpha(t)); }

double Affine1DField::flow_map(double x, double t) const {
  return sigma_ / v(t) * (x - mu_ * t) + mu_;
}

double Affine1DField::flow_jacobian(double t) const { return sigma_ / v(t); }

Vec Affine1DField::eval(const Vec& x, double t) const {
  Vec out(1);
  out[0] = alpha(t) * x[0] + beta(t);
  return out;
}

Vec Affine1DField::jvp(const Vec&, double t, const Vec& v) const { return alpha(t) * v; }
Vec Affine1DField::vjp(const Vec&, double t, const Vec& u) const { return alpha(t) * u; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "silu") return Activation::Silu;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "silu"; }

double act_value(Activation a, double z) {
  if (a == Activation::Tanh) return std::tanh(z);
  return z / (1.0 + std::exp(-z));
}

double act_deriv(Activation a, double z) {
  if (a == Activation::Tanh) {
    const double th = std::tanh(z);
    return 1.0 - th * th;
  }
  const double sg = 1.0 / (1.0 + std::exp(-z));
  return sg * (1.0 + z * (1.0 - sg));
}

}  // namespace tocflow
