#include <algorithm>
#include <cmath>

#include "tocflow/experiments.hpp"

namespace tocflow {

namespace {

struct Probe {
  double adjoint = 0.0;
  double grad = 0.0;
};

// Generic linear-map pair with a scalar functional for the derivative check.
struct DiffItem {
  std::string name;
  int d_in = 0, d_out = 0;
  std::function<Vec(const Vec&)> value;
  std::function<Vec(const Vec&, const Vec&)> jvp;
  std::function<Vec(const Vec&, const Vec&)> vjp;
  std::function<Vec(RngStream&)> draw;  // probe point
};

double adjoint_error(const DiffItem& it, const Vec& x, const Vec& u, const Vec& v) {
  const Vec jv = it.jvp(x, v), jtu = it.vjp(x, u);
  const double lhs = u.dot(jv), rhs = jtu.dot(v);
  const double scale = u.norm() * jv.norm() + jtu.norm() * v.norm();
  return scale == 0.0 ? std::abs(lhs - rhs) : std::abs(lhs - rhs) / scale;
}

Probe run_item(const DiffItem& it, RngStream& rng, int probes, double eps) {
  Probe worst;
  for (int p = 0; p < probes; ++p) {
    const Vec x = it.draw(rng);
    const Vec u = rng.normal_vec(it.d_out), v = rng.normal_vec(it.d_in);
    worst.adjoint = std::max(worst.adjoint, adjoint_error(it, x, u, v));
    auto phi = [&](const Vec& z) { return u.dot(it.value(z)); };
    auto grad = [&](const Vec& z) { return it.vjp(z, u); };
    worst.grad = std::max(worst.grad, grad_check(phi, grad, x, eps));
  }
  return worst;
}

DiffItem field_item(std::string name, FieldPtr f, double t_max = 0.95) {
  DiffItem it;
  it.name = std::move(name);
  it.d_in = it.d_out = f->dim() + 0;
  // The probe time is carried in a shared slot set by draw().
  auto t = std::make_shared<double>(0.0);
  it.value = [f, t](const Vec& x) { return f->eval(x, *t); };
  it.jvp = [f, t](const Vec& x, const Vec& v) { return f->jvp(x, *t, v); };
  it.vjp = [f, t](const Vec& x, const Vec& u) { return f->vjp(x, *t, u); };
  it.draw = [f, t, t_max](RngStream& rng) {
    *t = rng.uniform(0.0, t_max);
    return Vec(2.0 * rng.normal_vec(f->dim()));
  };
  return it;
}

DiffItem lookahead_item(std::string name, FieldPtr f, int k) {
  DiffItem it;
  it.name = std::move(name);
  it.d_in = it.d_out = f->dim();
  auto t = std::make_shared<double>(0.0);
  it.value = [f, t, k](const Vec& x) { return lookahead_flow(*f, x, *t, k); };
  it.jvp = [f, t, k](const Vec& x, const Vec& v) { return forward_chain(*f, unroll(*f, x, *t, k), v); };
  it.vjp = [f, t, k](const Vec& x, const Vec& u) { return reverse_chain(*f, unroll(*f, x, *t, k), u); };
  it.draw = [f, t](RngStream& rng) {
    *t = rng.uniform(0.0, 0.9);
    return Vec(2.0 * rng.normal_vec(f->dim()));
  };
  return it;
}

DiffItem constraint_item(std::string name, ConstraintPtr c, std::function<Vec(RngStream&)> draw) {
  DiffItem it;
  it.name = std::move(name);
  it.d_in = c->dim_in();
  it.d_out = c->dim();
  it.value = [c](const Vec& x) { return c->residual(x); };
  it.jvp = [c](const Vec& x, const Vec& v) { return c->jvp(x, v); };
  it.vjp = [c](const Vec& x, const Vec& u) { return c->vjp(x, u); };
  it.draw = std::move(draw);
  return it;
}

Mat random_lower(RngStream& rng, int d) {
  Mat l = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) l(i, j) = 0.4 * rng.normal();
    l(i, i) = 0.5 + rng.uniform();
  }
  return l;
}

}  // namespace

TaskResult run_gradcheck(const json& cfg) {
  TaskResult res;
  const int probes = cfg.at("probes");
  const double eps = cfg.at("eps"), adj_tol = cfg.at("adjoint_tol"), grad_tol = cfg.at("grad_tol");
  if (probes < 1 || !(eps > 0.0)) throw ConfigError("gradcheck: probes >= 1 and eps > 0 required");
  RngStream setup(cfg.at("seed").get<std::uint64_t>(), 0);

  std::vector<DiffItem> items;
  items.push_back(field_item("affine1d", std::make_shared<Affine1DField>(2.0, 1.0)));
  {
    Mat a(4, 4);
    for (int i = 0; i < 16; ++i) a(i / 4, i % 4) = setup.normal();
    items.push_back(field_item("linear", std::make_shared<LinearField>(a)));
  }
  FieldPtr mix;
  {
    std::vector<Vec> means;
    std::vector<Mat> chol;
    for (int j = 0; j < 3; ++j) {
      means.push_back(1.5 * setup.normal_vec(3));
      chol.push_back(random_lower(setup, 3));
    }
    mix = std::make_shared<GaussianMixtureField>(std::vector<double>{0.2, 0.3, 0.5}, means, chol);
    items.push_back(field_item("mixture", mix));
  }
  {
    std::vector<MixtureComponent> comps;
    for (int j = 0; j < 2; ++j) {
      MixtureComponent c;
      c.weight = 0.5;
      c.mean = setup.normal_vec(5);
      Mat g(5, 2);
      for (int i = 0; i < 10; ++i) g(i / 2, i % 2) = setup.normal();
      c.basis = Eigen::HouseholderQR<Mat>(g).householderQ() * Mat::Identity(5, 2);
      c.eigvals = Vec::Constant(2, 0.5) + setup.uniform() * Vec::Ones(2);
      c.floor = 0.05;
      comps.push_back(c);
    }
    items.push_back(field_item("mixture_lowrank", std::make_shared<GaussianMixtureField>(comps)));
  }
  for (Activation a : {Activation::Tanh, Activation::Silu}) {
    auto net = std::make_shared<NeuralMLPField>(3, std::vector<int>{16, 16}, a);
    net->init_xavier(setup);
    Vec p = net->flat_params();
    p += 0.1 * setup.normal_vec(static_cast<int>(p.size()));
    net->set_flat_params(p);
    items.push_back(field_item("mlp_" + to_string(a), net));
  }
  items.push_back(lookahead_item("lookahead_mixture", mix, 4));

  items.push_back(constraint_item(
      "coordinate", std::make_shared<CoordinateEquality>(6, std::vector<int>{0, 3, 5}, setup.normal_vec(3)),
      [](RngStream& r) { return r.normal_vec(6); }));
  {
    Mat a(3, 5);
    for (int i = 0; i < 15; ++i) a(i / 5, i % 5) = setup.normal();
    items.push_back(constraint_item("linear", std::make_shared<LinearConstraint>(a, setup.normal_vec(3)),
                                    [](RngStream& r) { return r.normal_vec(5); }));
  }
  {
    GPTrajectorySpec gs;
    gs.n_x = 32;
    auto corr = std::make_shared<CorridorConstraint>(gen_corridors(gs, setup));
    // Probes keep every spanned coordinate at least 1e-3 from a corridor edge.
    items.push_back(constraint_item("corridor", corr, [corr](RngStream& r) {
      for (;;) {
        Vec x = 4.0 * r.normal_vec(32);
        bool ok = true;
        for (const auto& sp : corr->spans())
          for (int i : sp.index)
            ok = ok && std::abs(x[i] - sp.lower) > 1e-3 && std::abs(x[i] - sp.upper) > 1e-3;
        if (ok) return x;
      }
    }));
  }
  {
    auto darcy = std::make_shared<DarcyConstraint>(5);
    items.push_back(constraint_item("darcy", darcy, [](RngStream& r) {
      Vec x = r.normal_vec(50);
      x.head(25) *= 0.3;
      return x;
    }));
  }
  items.push_back(constraint_item("spectrum", std::make_shared<SpectrumConstraint>(32),
                                  [](RngStream& r) { return r.normal_vec(32 * 32); }));

  json detail = json::object();
  for (std::size_t i = 0; i < items.size(); ++i) {
    RngStream rng(cfg.at("seed").get<std::uint64_t>(), 100 + i);
    const Probe p = run_item(items[i], rng, probes, eps);
    detail[items[i].name] = {{"adjoint", p.adjoint}, {"grad", p.grad}};
    res.checks.push_back({items[i].name + "_adjoint", p.adjoint, adj_tol, p.adjoint <= adj_tol, ""});
    res.checks.push_back({items[i].name + "_grad", p.grad, grad_tol, p.grad <= grad_tol, ""});
  }
  res.summary["items"] = detail;
  res.summary["checks"] = json::array();
  for (const auto& c : res.checks)
    res.summary["checks"].push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
  res.summary["pass"] = res.pass();
  return res;
}

}  // namespace tocflow
