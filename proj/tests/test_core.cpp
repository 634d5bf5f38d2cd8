#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "tocflow/core.hpp"

using namespace tocflow;

namespace {

Mat random_spd(RngStream& rng, int n) {
  Mat b(n, n);
  for (int i = 0; i < n * n; ++i) b(i / n, i % n) = rng.normal();
  return b * b.transpose() + Mat::Identity(n, n);
}

// O(n^4) reference transform.
CMat naive_dft(const Mat& x) {
  const int r = static_cast<int>(x.rows()), c = static_cast<int>(x.cols());
  CMat out(r, c);
  for (int k = 0; k < r; ++k)
    for (int l = 0; l < c; ++l) {
      std::complex<double> acc = 0.0;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          acc += x(i, j) * std::polar(1.0, -2.0 * std::numbers::pi * (double(k * i) / r + double(l * j) / c));
      out(k, l) = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  const Vec va = a.normal_vec(16), vb = b.normal_vec(16), vc = c.normal_vec(16), vd = d.normal_vec(16);
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("cholesky") {
  CHECK(cholesky(Mat::Identity(3, 3)).isApprox(Mat::Identity(3, 3), 0.0));
  Mat a(2, 2);
  a << 4, 2, 2, 3;
  Mat expect(2, 2);
  expect << 2, 0, 1, std::sqrt(2.0);
  CHECK((cholesky(a) - expect).norm() < 1e-14);

  RngStream rng(1, 0);
  for (int n : {3, 8, 20}) {
    const Mat s = random_spd(rng, n);
    const Mat l = cholesky(s);
    CHECK((l * l.transpose() - s).norm() / s.norm() <= 1e-10);
    CHECK(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0);
  }
  Mat bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(cholesky(bad), NotPositiveDefinite);
}

TEST_CASE("cg_solve examples") {
  const Vec b = (Vec(3) << 1.0, -2.0, 0.5).finished();
  auto id = cg_solve([](const Vec& v) { return v; }, b, 1e-12, 10);
  CHECK(id.converged);
  CHECK(id.iterations == 1);
  CHECK((id.x - b).norm() == doctest::Approx(0.0));

  auto dg = cg_solve([](const Vec& v) { return Vec((Vec(2) << v[0], 4 * v[1]).finished()); },
                     (Vec(2) << 1, 4).finished(), 1e-12, 10);
  CHECK(dg.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dg.x[1] == doctest::Approx(1.0).epsilon(1e-12));

  RngStream rng(2, 0);
  Mat m(3, 5);
  for (int i = 0; i < 15; ++i) m(i / 5, i % 5) = rng.normal();
  const Mat op = Mat::Identity(3, 3) + 0.5 * m * m.transpose();
  const Vec rhs = rng.normal_vec(3);
  auto res = cg_solve([&](const Vec& v) { return Vec(op * v); }, rhs, 1e-12, 50);
  const Vec direct = op.ldlt().solve(rhs);
  CHECK((res.x - direct).norm() <= 1e-8 * direct.norm());
}

TEST_CASE("cg_solve converges within n iterations on SPD systems") {
  RngStream rng(3, 0);
  for (int n : {2, 5, 12, 32}) {
    // Spectrum in [1, 3]; the n-step property is exact-arithmetic, so keep rounding drift small.
    const Mat q = Eigen::HouseholderQR<Mat>(random_spd(rng, n)).householderQ();
    Vec ev(n);
    for (int i = 0; i < n; ++i) ev[i] = 1.0 + 2.0 * i / std::max(1, n - 1);
    const Mat a = q * ev.asDiagonal() * q.transpose();
    const Vec b = rng.normal_vec(n);
    auto res = cg_solve([&](const Vec& v) { return Vec(a * v); }, b, 1e-8, n);
    const Vec direct = a.ldlt().solve(b);
    CHECK(res.converged);
    CHECK(res.iterations <= n);
    CHECK((a * res.x - b).norm() <= 1e-8 * b.norm());
    CHECK((res.x - direct).norm() <= 1e-6 * direct.norm());
  }
}

TEST_CASE("cg_solve reports breakdown on indefinite operators") {
  const Vec b = Vec::Ones(2);
  auto res = cg_solve([](const Vec& v) { return Vec(-v); }, b, 1e-10, 5);
  CHECK(res.breakdown);
  CHECK_FALSE(res.converged);
  CHECK(res.x.allFinite());
}

TEST_CASE("simpson_quad") {
  CHECK(simpson_quad([](double) { return 1.0; }, 0, 1, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(simpson_quad([](double t) { return t * t * t; }, 0, 1, 2) == doctest::Approx(0.25).epsilon(1e-15));
  const auto f = [](double t) { return 1.0 / ((1 - t) * (1 - t) + t * t); };
  CHECK(std::abs(simpson_quad(f, 0, 1, 1000) - std::numbers::pi / 2) <= 1e-9);
  CHECK_THROWS(simpson_quad(f, 0, 1, 3));
}

TEST_CASE("simpson_quad is fourth order") {
  const auto f = [](double t) { return std::exp(std::sin(3 * t)); };
  const double ref = simpson_quad(f, 0, 2, 1 << 14);
  for (int n : {32, 64, 128}) {
    const double e1 = std::abs(simpson_quad(f, 0, 2, n) - ref);
    const double e2 = std::abs(simpson_quad(f, 0, 2, 2 * n) - ref);
    CHECK(e1 / e2 >= 15.0);
  }
}

TEST_CASE("dft2") {
  const Mat zero = Mat::Zero(4, 4);
  CHECK(dft2(zero, FftDir::Forward).norm() == 0.0);

  const Mat cst = Mat::Constant(8, 8, 1.5);
  const CMat f = dft2(cst, FftDir::Forward);
  CHECK(std::abs(f(0, 0) - std::complex<double>(1.5 * 64, 0)) < 1e-12);
  CHECK(f.norm() == doctest::Approx(1.5 * 64).epsilon(1e-12));

  RngStream rng(4, 0);
  Mat x(8, 8);
  for (int i = 0; i < 64; ++i) x(i / 8, i % 8) = rng.normal();
  const CMat fx = dft2(x, FftDir::Forward);
  CHECK((fx - naive_dft(x)).norm() <= 1e-10 * fx.norm());
  // Parseval and the inverse convention.
  CHECK(x.squaredNorm() == doctest::Approx(fx.squaredNorm() / 64).epsilon(1e-9));
  const CMat back = dft2(fx, FftDir::Inverse);
  CHECK((back.real() - 64.0 * x).norm() <= 1e-10 * x.norm() * 64);
  CHECK(back.imag().norm() <= 1e-10 * x.norm() * 64);
}

TEST_CASE("gauss_sample") {
  RngStream a(5, 1);
  const Vec mean = (Vec(3) << 1, 2, 3).finished();
  CHECK(gauss_sample(a, mean, Mat::Zero(3, 3)) == mean);
  Mat l = Mat::Identity(3, 3);
  l(2, 0) = 0.5;
  RngStream c(9, 2), d(9, 2);
  CHECK(gauss_sample(c, mean, l) == gauss_sample(d, mean, l));

  RngStream rng(6, 0);
  const int n = 100000;
  Vec acc = Vec::Zero(3);
  for (int i = 0; i < n; ++i) acc += gauss_sample(rng, Vec::Zero(3), Mat::Identity(3, 3));
  CHECK((acc / n).cwiseAbs().maxCoeff() <= 0.02);
  CHECK_THROWS_AS(gauss_sample(rng, Vec::Zero(2), Mat::Identity(3, 3)), ShapeError);
}

TEST_CASE("grad_check") {
  RngStream rng(7, 0);
  const Vec x = rng.normal_vec(5);
  const auto half_sq = [](const Vec& z) { return 0.5 * z.squaredNorm(); };
  CHECK(grad_check(half_sq, [](const Vec& z) { return z; }, x, 1e-5) <= 1e-9);

  const Vec y = (Vec(2) << 0.7, -1.3).finished();
  const auto f = [](const Vec& z) { return std::sin(z[0]) * z[1]; };
  const auto g = [](const Vec& z) { return Vec((Vec(2) << std::cos(z[0]) * z[1], std::sin(z[0])).finished()); };
  CHECK(grad_check(f, g, y, 1e-5) <= 1e-6);
  CHECK(grad_check(half_sq, [](const Vec& z) { return Vec(2.0 * z); }, x, 1e-5) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("percentile interpolates linearly") {
  CHECK(percentile({3, 1, 2}, 50) == 2.0);
  CHECK(percentile({1, 2, 3, 4}, 50) == 2.5);
  CHECK(percentile({1, 2, 3, 4}, 0) == 1.0);
  CHECK(percentile({1, 2, 3, 4}, 100) == 4.0);
  CHECK(std::isnan(percentile({}, 50)));
}
