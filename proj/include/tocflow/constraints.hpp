#pragma once

#include <memory>
#include <vector>

#include "tocflow/core.hpp"

namespace tocflow {

class Constraint {
 public:
  virtual ~Constraint() = default;
  virtual int dim() const = 0;     // r
  virtual int dim_in() const = 0;  // d
  virtual Vec residual(const Vec& x) const = 0;
  virtual Vec jvp(const Vec& x, const Vec& v) const = 0;
  virtual Vec vjp(const Vec& x, const Vec& u) const = 0;
};

using ConstraintPtr = std::shared_ptr<const Constraint>;

double terminal_cost(const Constraint& c, const Vec& x);
Vec terminal_grad(const Constraint& c, const Vec& x);

// h(x) = x_I - y
class CoordinateEquality : public Constraint {
 public:
  CoordinateEquality(int d, std::vector<int> index, Vec target);
  int dim() const override { return static_cast<int>(idx_.size()); }
  int dim_in() const override { return d_; }
  Vec residual(const Vec& x) const override;
  Vec jvp(const Vec& x, const Vec& v) const override;
  Vec vjp(const Vec& x, const Vec& u) const override;

 private:
  int d_;
  std::vector<int> idx_;
  Vec y_;
};

// h(x) = A x - b
class LinearConstraint : public Constraint {
 public:
  LinearConstraint(Mat a, Vec b);
  int dim() const override { return static_cast<int>(a_.rows()); }
  int dim_in() const override { return static_cast<int>(a_.cols()); }
  Vec residual(const Vec& x) const override { return a_ * x - b_; }
  Vec jvp(const Vec&, const Vec& v) const override { return a_ * v; }
  Vec vjp(const Vec&, const Vec& u) const override { return a_.transpose() * u; }

 private:
  Mat a_;
  Vec b_;
};

struct CorridorSpan {
  std::vector<int> index;
  double lower = 0.0, upper = 0.0;
};

class CorridorConstraint : public Constraint {
 public:
  CorridorConstraint(int d, std::vector<CorridorSpan> spans);
  int dim() const override { return total_; }
  int dim_in() const override { return d_; }
  Vec residual(const Vec& x) const override;
  Vec jvp(const Vec& x, const Vec& v) const override;
  Vec vjp(const Vec& x, const Vec& u) const override;
  const std::vector<CorridorSpan>& spans() const { return spans_; }

 private:
  // -1, 0 or +1 per residual entry: sign of d h / d x at that index.
  double slope(double f, double lo, double hi) const;
  int d_;
  int total_ = 0;
  std::vector<CorridorSpan> spans_;
};

struct DarcySource {
  double magnitude = 10.0;
  double width = 0.125;
};

// State [log K ; p], each n*n row-major on the unit square with spacing 1/(n-1).
class DarcyConstraint : public Constraint {
 public:
  DarcyConstraint(int n, DarcySource src = {});
  int dim() const override { return n_ * n_; }
  int dim_in() const override { return 2 * n_ * n_; }
  Vec residual(const Vec& x) const override;
  Vec jvp(const Vec& x, const Vec& v) const override;
  Vec vjp(const Vec& x, const Vec& u) const override;

  int n() const { return n_; }
  double spacing() const { return dx_; }
  const Vec& source() const { return f_; }
  bool is_boundary(int i, int j) const { return i == 0 || j == 0 || i == n_ - 1 || j == n_ - 1; }
  // Residual of the pressure block for fixed K: rows are linear in p, offset by -f.
  Vec pressure_operator(const Vec& k, const Vec& p) const;
  Vec pressure_operator_t(const Vec& k, const Vec& u) const;

 private:
  Vec interior_k_part(const Vec& dk, const Vec& p) const;
  Vec interior_k_part_t(const Vec& p, const Vec& u) const;
  int n_;
  double dx_;
  Vec f_;
};

enum class SpectrumConvention { Velocity, Vorticity };

class SpectrumConstraint : public Constraint {
 public:
  static constexpr double kFloor = 1e-30;
  SpectrumConstraint(int n, int kmin = 2, int kmax = 9,
                     SpectrumConvention conv = SpectrumConvention::Velocity);
  int dim() const override { return 1; }
  int dim_in() const override { return n_ * n_; }
  Vec residual(const Vec& x) const override;
  Vec jvp(const Vec& x, const Vec& v) const override;
  Vec vjp(const Vec& x, const Vec& u) const override;

  // E(k) for shells k = 0 .. n/2-1 (entry 0 is always zero).
  Vec energy_spectrum(const Vec& omega) const;
  int n() const { return n_; }

 private:
  CMat forward(const Vec& x) const;
  Vec shell_grad(const Vec& e) const;
  int n_, kmin_, kmax_;
  SpectrumConvention conv_;
  std::vector<int> shell_;   // per flat mode index, -1 if excluded
  std::vector<double> wgt_;  // 1/|k|^2 or 1
};

Vec corridor_residual(const CorridorConstraint& c, const Vec& f);
Vec darcy_residual(const DarcyConstraint& c, const Vec& state);
Vec energy_spectrum(const SpectrumConstraint& c, const Vec& omega);
double spectrum_residual(const SpectrumConstraint& c, const Vec& omega);

struct GridTooSmall : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace tocflow
