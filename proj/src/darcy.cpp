#include <cmath>

#include "tocflow/constraints.hpp"

namespace tocflow {

namespace {

Vec centered(const Vec& p) { return (p.array() - p.mean()).matrix(); }

// Visits (row, node, coef) for the pressure-linear rows given K.
template <class Visit>
void pressure_stencil(int n, double dx, const Vec& k, Visit&& visit) {
  const double h2 = dx * dx;
  auto id = [n](int i, int j) { return i * n + j; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int row = id(i, j);
      const bool bnd = i == 0 || j == 0 || i == n - 1 || j == n - 1;
      if (!bnd) {
        const double kc = k[row];
        const double gy = k[id(i + 1, j)] - k[id(i - 1, j)];
        const double gx = k[id(i, j + 1)] - k[id(i, j - 1)];
        visit(row, id(i + 1, j), -kc / h2 - gy / (4.0 * h2));
        visit(row, id(i - 1, j), -kc / h2 + gy / (4.0 * h2));
        visit(row, id(i, j + 1), -kc / h2 - gx / (4.0 * h2));
        visit(row, id(i, j - 1), -kc / h2 + gx / (4.0 * h2));
        visit(row, row, 4.0 * kc / h2);
        continue;
      }
      if (j == 0) {
        visit(row, row, 1.0 / dx);
        visit(row, id(i, 1), -1.0 / dx);
      }
      if (j == n - 1) {
        visit(row, row, 1.0 / dx);
        visit(row, id(i, n - 2), -1.0 / dx);
      }
      if (i == 0) {
        visit(row, row, 1.0 / dx);
        visit(row, id(1, j), -1.0 / dx);
      }
      if (i == n - 1) {
        visit(row, row, 1.0 / dx);
        visit(row, id(n - 2, j), -1.0 / dx);
      }
    }
  }
}

// Visits (row, node, coef) for the K-linear part of the interior rows given p.
template <class Visit>
void permeability_stencil(int n, double dx, const Vec& p, Visit&& visit) {
  const double h2 = dx * dx;
  auto id = [n](int i, int j) { return i * n + j; };
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      const int row = id(i, j);
      const double lap = (p[id(i + 1, j)] + p[id(i - 1, j)] + p[id(i, j + 1)] + p[id(i, j - 1)] -
                          4.0 * p[row]) / h2;
      const double dy = p[id(i + 1, j)] - p[id(i - 1, j)];
      const double dxp = p[id(i, j + 1)] - p[id(i, j - 1)];
      visit(row, row, -lap);
      visit(row, id(i + 1, j), -dy / (4.0 * h2));
      visit(row, id(i - 1, j), dy / (4.0 * h2));
      visit(row, id(i, j + 1), -dxp / (4.0 * h2));
      visit(row, id(i, j - 1), dxp / (4.0 * h2));
    }
  }
}

}  // namespace

DarcyConstraint::DarcyConstraint(int n, DarcySource src) : n_(n) {
  if (n < 3) throw GridTooSmall("DarcyConstraint: grid side must be at least 3");
  dx_ = 1.0 / (n - 1);
  f_ = Vec::Zero(n * n);
  const double w = src.width;
  const double tol = 1e-12;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double xs = j * dx_, ys = i * dx_;
      const bool lo = std::abs(xs - w / 2) <= w / 2 + tol && std::abs(ys - w / 2) <= w / 2 + tol;
      const bool hi = std::abs(xs - (1 - w / 2)) <= w / 2 + tol &&
                      std::abs(ys - (1 - w / 2)) <= w / 2 + tol;
      if (lo) f_[i * n + j] = src.magnitude;
      else if (hi) f_[i * n + j] = -src.magnitude;
    }
  }
}

Vec DarcyConstraint::pressure_operator(const Vec& k, const Vec& p) const {
  Vec out = Vec::Zero(n_ * n_);
  pressure_stencil(n_, dx_, k, [&](int row, int node, double c) { out[row] += c * p[node]; });
  return out;
}

Vec DarcyConstraint::pressure_operator_t(const Vec& k, const Vec& u) const {
  Vec out = Vec::Zero(n_ * n_);
  pressure_stencil(n_, dx_, k, [&](int row, int node, double c) { out[node] += c * u[row]; });
  return out;
}

Vec DarcyConstraint::interior_k_part(const Vec& dk, const Vec& p) const {
  Vec out = Vec::Zero(n_ * n_);
  permeability_stencil(n_, dx_, p, [&](int row, int node, double c) { out[row] += c * dk[node]; });
  return out;
}

Vec DarcyConstraint::interior_k_part_t(const Vec& p, const Vec& u) const {
  Vec out = Vec::Zero(n_ * n_);
  permeability_stencil(n_, dx_, p, [&](int row, int node, double c) { out[node] += c * u[row]; });
  return out;
}

Vec DarcyConstraint::residual(const Vec& x) const {
  if (x.size() != 2 * n_ * n_) throw ShapeError("DarcyConstraint: state dimension mismatch");
  const int m = n_ * n_;
  const Vec k = x.head(m).array().exp().matrix();
  Vec r = pressure_operator(k, centered(x.tail(m)));
  for (int q = 0; q < m; ++q)
    if (!is_boundary(q / n_, q % n_)) r[q] -= f_[q];
  return r;
}

Vec DarcyConstraint::jvp(const Vec& x, const Vec& v) const {
  const int m = n_ * n_;
  const Vec k = x.head(m).array().exp().matrix();
  const Vec pc = centered(x.tail(m));
  const Vec dk = k.cwiseProduct(v.head(m));
  return interior_k_part(dk, pc) + pressure_operator(k, centered(v.tail(m)));
}

Vec DarcyConstraint::vjp(const Vec& x, const Vec& u) const {
  const int m = n_ * n_;
  const Vec k = x.head(m).array().exp().matrix();
  const Vec pc = centered(x.tail(m));
  Vec g(2 * m);
  g.head(m) = k.cwiseProduct(interior_k_part_t(pc, u));
  g.tail(m) = centered(pressure_operator_t(k, u));
  return g;
}

Vec darcy_residual(const DarcyConstraint& c, const Vec& state) { return c.residual(state); }

}  // namespace tocflow
