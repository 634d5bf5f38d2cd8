#include <cmath>

#include "tocflow/constraints.hpp"

namespace tocflow {

double terminal_cost(const Constraint& c, const Vec& x) { return 0.5 * c.residual(x).squaredNorm(); }

Vec terminal_grad(const Constraint& c, const Vec& x) { return c.vjp(x, c.residual(x)); }

CoordinateEquality::CoordinateEquality(int d, std::vector<int> index, Vec target)
    : d_(d), idx_(std::move(index)), y_(std::move(target)) {
  if (static_cast<std::size_t>(y_.size()) != idx_.size())
    throw ShapeError("CoordinateEquality: index and target sizes differ");
  std::vector<bool> seen(d, false);
  for (int i : idx_) {
    if (i < 0 || i >= d) throw std::out_of_range("CoordinateEquality: index out of range");
    if (seen[i]) throw std::invalid_argument("CoordinateEquality: duplicate index");
    seen[i] = true;
  }
}

Vec CoordinateEquality::residual(const Vec& x) const {
  Vec r(idx_.size());
  for (std::size_t k = 0; k < idx_.size(); ++k) r[k] = x[idx_[k]] - y_[k];
  return r;
}

Vec CoordinateEquality::jvp(const Vec&, const Vec& v) const {
  Vec r(idx_.size());
  for (std::size_t k = 0; k < idx_.size(); ++k) r[k] = v[idx_[k]];
  return r;
}

Vec CoordinateEquality::vjp(const Vec&, const Vec& u) const {
  Vec g = Vec::Zero(d_);
  for (std::size_t k = 0; k < idx_.size(); ++k) g[idx_[k]] += u[k];
  return g;
}

LinearConstraint::LinearConstraint(Mat a, Vec b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != b_.size()) throw ShapeError("LinearConstraint: shape mismatch");
}

CorridorConstraint::CorridorConstraint(int d, std::vector<CorridorSpan> spans)
    : d_(d), spans_(std::move(spans)) {
  for (const auto& s : spans_) {
    if (!(s.lower < s.upper)) throw std::invalid_argument("CorridorConstraint: lower >= upper");
    for (int i : s.index)
      if (i < 0 || i >= d) throw std::out_of_range("CorridorConstraint: index out of range");
    total_ += static_cast<int>(s.index.size());
  }
  if (total_ == 0) throw std::invalid_argument("CorridorConstraint: no constrained indices");
}

double CorridorConstraint::slope(double f, double lo, double hi) const {
  if (f < lo) return -1.0;
  if (f > hi) return 1.0;
  return 0.0;
}

Vec CorridorConstraint::residual(const Vec& x) const {
  Vec r(total_);
  const double sc = 1.0 / std::sqrt(static_cast<double>(total_));
  int k = 0;
  for (const auto& s : spans_)
    for (int i : s.index) {
      const double f = x[i];
      r[k++] = sc * (std::max(0.0, s.lower - f) + std::max(0.0, f - s.upper));
    }
  return r;
}

Vec CorridorConstraint::jvp(const Vec& x, const Vec& v) const {
  Vec r(total_);
  const double sc = 1.0 / std::sqrt(static_cast<double>(total_));
  int k = 0;
  for (const auto& s : spans_)
    for (int i : s.index) r[k++] = sc * slope(x[i], s.lower, s.upper) * v[i];
  return r;
}

Vec CorridorConstraint::vjp(const Vec& x, const Vec& u) const {
  Vec g = Vec::Zero(d_);
  const double sc = 1.0 / std::sqrt(static_cast<double>(total_));
  int k = 0;
  for (const auto& s : spans_)
    for (int i : s.index) g[i] += sc * slope(x[i], s.lower, s.upper) * u[k++];
  return g;
}

Vec corridor_residual(const CorridorConstraint& c, const Vec& f) { return c.residual(f); }

}  // namespace tocflow
