#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tocflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Seeded normal/uniform source. Identical (seed, stream) pairs give identical draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  Vec normal_vec(int d);
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_, stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

Mat cholesky(const Mat& a);

struct CgResult {
  Vec x;
  int iterations = 0;
  bool converged = false;
  bool breakdown = false;
};

using LinearMap = std::function<Vec(const Vec&)>;

// Plain CG. On NaN or nonpositive curvature returns the last finite iterate with breakdown set.
CgResult cg_solve(const LinearMap& apply, const Vec& b, double tol, int max_iter);

double simpson_quad(const std::function<double(double)>& f, double a, double b, int n = 1024);

enum class FftDir { Forward, Inverse };

// Unnormalized in both directions: inverse(forward(x)) = rows*cols*x.
CMat dft2(const CMat& field, FftDir dir);
CMat dft2(const Mat& field, FftDir dir);

Vec gauss_sample(RngStream& rng, const Vec& mean, const Mat& chol);

// Max over coordinates of |g_i - fd_i| / max(|fd_i|, 1e-3 * max_j |fd_j|).
double grad_check(const std::function<double(const Vec&)>& f,
                  const std::function<Vec(const Vec&)>& grad, const Vec& x, double eps);

double percentile(std::vector<double> v, double q);

}  // namespace tocflow
