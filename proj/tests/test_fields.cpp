#include <cmath>

#include "doctest.h"
#include "tocflow/constraints.hpp"
#include "tocflow/fields.hpp"

using namespace tocflow;

namespace {

Mat random_lower(RngStream& rng, int d) {
  Mat l = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) l(i, j) = 0.4 * rng.normal();
    l(i, i) = 0.5 + rng.uniform();
  }
  return l;
}

GaussianMixtureField random_mixture(RngStream& rng, int d, int m) {
  std::vector<double> w;
  std::vector<Vec> means;
  std::vector<Mat> chol;
  for (int j = 0; j < m; ++j) {
    w.push_back(0.2 + rng.uniform());
    means.push_back(1.5 * rng.normal_vec(d));
    chol.push_back(random_lower(rng, d));
  }
  return GaussianMixtureField(w, means, chol);
}

double adjoint_gap(const VelocityField& f, const Vec& x, double t, const Vec& u, const Vec& v) {
  const Vec jv = f.jvp(x, t, v), jtu = f.vjp(x, t, u);
  return std::abs(u.dot(jv) - jtu.dot(v)) / (u.norm() * jv.norm() + jtu.norm() * v.norm());
}

void check_derivatives(const VelocityField& f, RngStream& rng, int probes) {
  for (int p = 0; p < probes; ++p) {
    const double t = rng.uniform(0.0, 0.95);
    const Vec x = 2.0 * rng.normal_vec(f.dim());
    const Vec u = rng.normal_vec(f.dim()), v = rng.normal_vec(f.dim());
    CHECK(adjoint_gap(f, x, t, u, v) <= 1e-10);
    auto phi = [&](const Vec& z) { return u.dot(f.eval(z, t)); };
    auto grad = [&](const Vec& z) { return f.vjp(z, t, u); };
    CHECK(grad_check(phi, grad, x, 1e-5) <= 1e-5);
  }
}

// Classic RK4 on the 1-D field as an independent flow-map oracle.
double rk4_flow(const VelocityField& f, double x, double t, int n) {
  const double h = (1.0 - t) / n;
  Vec y(1);
  y[0] = x;
  for (int i = 0; i < n; ++i) {
    const double s = t + i * h;
    const Vec k1 = f.eval(y, s), k2 = f.eval(y + 0.5 * h * k1, s + 0.5 * h);
    const Vec k3 = f.eval(y + 0.5 * h * k2, s + 0.5 * h), k4 = f.eval(y + h * k3, s + h);
    y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y[0];
}

}  // namespace

TEST_CASE("affine field coefficients") {
  const Affine1DField f(2.0, 1.5);
  for (double t : {0.0, 0.2, 0.5, 0.8, 0.99}) {
    const double h = 1e-6;
    const double vdot = (f.v(t + h) - f.v(t - h)) / (2 * h);
    CHECK(f.alpha(t) == doctest::Approx(vdot / f.v(t)).epsilon(1e-8));
    CHECK(f.beta(t) == doctest::Approx(2.0 * (1.0 - t * f.alpha(t))).epsilon(1e-14));
    CHECK(f.v(t) > 0.0);
    const Vec x = Vec::Constant(1, 0.7);
    CHECK(f.eval(x, t)[0] == doctest::Approx(f.alpha(t) * 0.7 + f.beta(t)));
  }
  CHECK_THROWS(Affine1DField(0.0, 0.0));
}

TEST_CASE("affine flow map agrees with RK4 integration") {
  const Affine1DField f(2.0, 1.0);
  for (double t : {0.0, 0.3, 0.7})
    for (double x : {-1.0, 0.4, 2.5}) {
      CHECK(f.flow_map(x, t) == doctest::Approx(rk4_flow(f, x, t, 2000)).epsilon(1e-10));
    }
  CHECK(f.flow_map(0.3, 0.0) == doctest::Approx(2.3));
}

TEST_CASE("mixture velocity examples") {
  const GaussianMixtureField iso({1.0}, {Vec::Zero(3)}, {Mat::Identity(3, 3)});
  for (double t : {0.0, 0.4, 0.9}) CHECK(iso.eval(Vec::Zero(3), t).norm() <= 1e-14);

  const Affine1DField aff(2.0, 1.3);
  const GaussianMixtureField one({1.0}, {Vec::Constant(1, 2.0)}, {Mat::Constant(1, 1, 1.3)});
  RngStream rng(11, 0);
  for (int i = 0; i < 20; ++i) {
    const double t = rng.uniform(0.0, 1.0);
    const Vec x = 3.0 * rng.normal_vec(1);
    CHECK(one.eval(x, t)[0] == doctest::Approx(aff.eval(x, t)[0]).epsilon(1e-8));
  }

  const Vec m = (Vec(2) << 1.5, -0.5).finished();
  const GaussianMixtureField sym({0.5, 0.5}, {m, Vec(-m)}, {Mat::Identity(2, 2), Mat::Identity(2, 2)});
  for (double t : {0.1, 0.5, 0.9}) CHECK(sym.eval(Vec::Zero(2), t).norm() <= 1e-14);
}

TEST_CASE("diagonal single component decouples into affine fields") {
  const Vec mean = (Vec(3) << 2.0, -1.0, 0.5).finished();
  const Vec sd = (Vec(3) << 1.0, 0.3, 2.0).finished();
  const GaussianMixtureField f({1.0}, {mean}, {Mat(sd.asDiagonal())});
  RngStream rng(12, 0);
  for (int i = 0; i < 10; ++i) {
    const double t = rng.uniform(0.0, 0.99);
    const Vec x = rng.normal_vec(3);
    const Vec b = f.eval(x, t);
    for (int c = 0; c < 3; ++c) {
      const Affine1DField a(mean[c], sd[c]);
      CHECK(b[c] == doctest::Approx(a.eval(Vec::Constant(1, x[c]), t)[0]).epsilon(1e-8));
    }
  }
}

TEST_CASE("posterior weights are normalized and shift invariant") {
  RngStream rng(13, 0);
  const auto f = random_mixture(rng, 3, 4);
  for (int i = 0; i < 10; ++i) {
    const double t = rng.uniform(0.0, 1.0);
    const Vec x = 3.0 * rng.normal_vec(3);
    const Vec p = f.posterior(x, t);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
    CHECK(p.minCoeff() >= 0.0);
    for (double shift : {-700.0, 1e3})
      CHECK((f.posterior_shifted(x, t, shift) - p).cwiseAbs().maxCoeff() <= 1e-12);
  }
  // Far from every component the weights stay finite.
  CHECK(f.posterior(Vec::Constant(3, 1e3), 0.5).allFinite());
}

TEST_CASE("mixture is defined at t = 1 with singular covariance") {
  Mat l = Mat::Zero(2, 2);
  l(0, 0) = 1.0;
  const GaussianMixtureField f({1.0}, {Vec::Zero(2)}, {l});
  CHECK(f.eval(Vec::Ones(2), 1.0).allFinite());
}

TEST_CASE("field derivatives pass adjoint and finite-difference checks") {
  RngStream rng(14, 0);
  SUBCASE("affine") { check_derivatives(Affine1DField(2.0, 0.7), rng, 10); }
  SUBCASE("linear") {
    Mat a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.normal();
    check_derivatives(LinearField(a), rng, 10);
  }
  SUBCASE("mixture") { check_derivatives(random_mixture(rng, 3, 3), rng, 20); }
  SUBCASE("low-rank mixture") {
    std::vector<MixtureComponent> comps;
    for (int j = 0; j < 2; ++j) {
      MixtureComponent c;
      c.mean = rng.normal_vec(4);
      Mat g(4, 2);
      for (int i = 0; i < 8; ++i) g(i / 2, i % 2) = rng.normal();
      c.basis = Eigen::HouseholderQR<Mat>(g).householderQ() * Mat::Identity(4, 2);
      c.eigvals = (Vec(2) << 0.8, 1.7).finished();
      c.floor = 0.05;
      comps.push_back(c);
    }
    const GaussianMixtureField f(comps);
    check_derivatives(f, rng, 20);
    // Covariance is the stated spectral form.
    const Mat s = f.covariance(0);
    const auto& c = f.components()[0];
    CHECK((s * c.basis - c.basis * c.eigvals.asDiagonal()).norm() <= 1e-12);
  }
  SUBCASE("mlp") {
    for (Activation a : {Activation::Tanh, Activation::Silu}) {
      NeuralMLPField net(2, {8, 8}, a);
      net.init_xavier(rng);
      Vec p = net.flat_params();
      p += 0.1 * rng.normal_vec(static_cast<int>(p.size()));
      net.set_flat_params(p);
      check_derivatives(net, rng, 10);
    }
  }
}

TEST_CASE("mlp examples") {
  NeuralMLPField zero(3, {5}, Activation::Tanh);
  const Vec x = Vec::Ones(3), v = Vec::Constant(3, 2.0);
  CHECK(zero.eval(x, 0.3).norm() == 0.0);
  CHECK(zero.jvp(x, 0.3, v).norm() == 0.0);
  CHECK(zero.vjp(x, 0.3, v).norm() == 0.0);

  Mat w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  const NeuralMLPField lin({w}, {Vec::Constant(2, 0.5)}, Activation::Tanh);
  const Vec y = (Vec(2) << 0.3, -0.2).finished(), dv = (Vec(2) << 1.0, 2.0).finished();
  CHECK((lin.jvp(y, 0.4, dv) - w.leftCols(2) * dv).norm() <= 1e-14);
  CHECK((lin.eval(y, 0.4) - (w.leftCols(2) * y + 0.4 * w.col(2) + Vec::Constant(2, 0.5))).norm() <= 1e-14);
  CHECK((mlp_eval_and_products(lin, y, 0.4, FieldMode::Vjp, dv) - w.leftCols(2).transpose() * dv).norm() <= 1e-14);

  RngStream rng(15, 0);
  NeuralMLPField net(2, {4}, Activation::Tanh);
  net.init_xavier(rng);
  const Vec p = net.flat_params();
  net.set_flat_params(p);
  CHECK(net.flat_params() == p);
  CHECK_THROWS_AS(net.set_flat_params(Vec::Zero(3)), ShapeError);
  CHECK(activation_from_string(to_string(Activation::Silu)) == Activation::Silu);
}

TEST_CASE("xavier initialization bounds") {
  RngStream rng(16, 0);
  NeuralMLPField net(1, {64, 64}, Activation::Tanh);
  net.init_xavier(rng);
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    const auto& w = net.weights()[l];
    const double a = std::sqrt(6.0 / double(w.rows() + w.cols()));
    CHECK(w.cwiseAbs().maxCoeff() <= a);
    CHECK(net.biases()[l].norm() == 0.0);
  }
}

TEST_CASE("lookahead examples") {
  const ConstantField zero(Vec::Zero(2));
  const Vec x = (Vec(2) << 0.3, -1.0).finished();
  CHECK(lookahead_flow(zero, x, 0.2, 4) == x);
  const Vec c = (Vec(2) << 1.5, -2.0).finished();
  const ConstantField cf(c);
  for (int k : {1, 3, 7}) CHECK((lookahead_flow(cf, x, 0.25, k) - (x + 0.75 * c)).norm() <= 1e-14);
  CHECK(lookahead_flow(cf, x, 1.0, 4) == x);

  // Euler with 1024 steps, computed independently; the first-order error constant is about 1.3.
  const Affine1DField aff(2.0, 1.0);
  const double euler_err[3] = {0.0012544845352200351, 0.0, -0.0015053814422691936};
  const double starts[3] = {-1.0, 0.0, 1.2};
  for (int i = 0; i < 3; ++i) {
    const double y = lookahead_flow(aff, Vec::Constant(1, starts[i]), 0.0, 1 << 10)[0];
    CHECK(y - (starts[i] + 2.0) == doctest::Approx(euler_err[i]).epsilon(1e-9));
    CHECK(std::abs(y - (starts[i] + 2.0)) <= 2e-3);
  }
  CHECK_THROWS(lookahead_flow(aff, Vec::Zero(1), 0.0, 0));
}

TEST_CASE("lookahead converges at first order") {
  const Affine1DField aff(2.0, 0.5);
  const double t = 0.2, x0 = 0.8;
  const double exact = aff.flow_map(x0, t);
  double prev = std::abs(lookahead_flow(aff, Vec::Constant(1, x0), t, 16)[0] - exact);
  for (int k : {32, 64, 128}) {
    const double err = std::abs(lookahead_flow(aff, Vec::Constant(1, x0), t, k)[0] - exact);
    CHECK(prev / err == doctest::Approx(2.0).epsilon(0.1));
    prev = err;
  }
}

TEST_CASE("lookahead diverges loudly") {
  const ConstantField inf(Vec::Constant(1, std::numeric_limits<double>::infinity()));
  CHECK_THROWS_AS(lookahead_flow(inf, Vec::Zero(1), 0.0, 2), LookaheadDiverged);
}

TEST_CASE("pullback gradient and forward sensitivity") {
  const ConstantField zero(Vec::Zero(3));
  const CoordinateEquality all(3, {0, 1, 2}, Vec::Zero(3));
  const Vec x = (Vec(3) << 1, -2, 0.5).finished();
  CHECK((pullback_grad(zero, all, x, 0.3, 4) - x).norm() == 0.0);
  CHECK(forward_sensitivity(zero, x, 0.3, 4, x) == x);

  const Affine1DField aff(2.0, 1.0);
  const CoordinateEquality at_target(1, {0}, Vec::Constant(1, 0.0));
  const double t = 0.3;
  const Vec y = lookahead_flow(aff, Vec::Constant(1, 0.4), t, 4);
  const CoordinateEquality hit(1, {0}, y);
  CHECK(pullback_grad(aff, hit, Vec::Constant(1, 0.4), t, 4).norm() == 0.0);

  auto h = [&](const Vec& z) { return 0.5 * lookahead_flow(aff, z, t, 4).squaredNorm(); };
  auto g = [&](const Vec& z) { return pullback_grad(aff, at_target, z, t, 4); };
  CHECK(grad_check(h, g, Vec::Constant(1, 0.4), 1e-5) <= 1e-6);

  const Vec v = Vec::Constant(1, 1.7);
  const double sens = forward_sensitivity(aff, Vec::Zero(1), 0.25, 1 << 10, v)[0] - aff.flow_jacobian(0.25) * 1.7;
  CHECK(sens == doctest::Approx(-0.0016916678703498).epsilon(1e-9));
  CHECK(std::abs(sens) <= 2e-3);

  RngStream rng(17, 0);
  const auto mix = random_mixture(rng, 3, 2);
  for (int i = 0; i < 5; ++i) {
    const Vec z = rng.normal_vec(3), u = rng.normal_vec(3), w = rng.normal_vec(3);
    const Unroll un = unroll(mix, z, 0.1, 4);
    const Vec fw = forward_chain(mix, un, w), rv = reverse_chain(mix, un, u);
    CHECK(std::abs(u.dot(fw) - rv.dot(w)) <= 1e-10 * (u.norm() * fw.norm() + rv.norm() * w.norm()));
  }
}
