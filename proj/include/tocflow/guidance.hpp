#pragma once

#include <string>

#include "tocflow/constraints.hpp"
#include "tocflow/fields.hpp"

namespace tocflow {

struct WeightSchedule {
  double lambda0 = 1.0;
  double gamma = 0.0;  // 0 is the constant schedule

  double lambda(double t) const;
};

// s(t) = int_t^1 1/lambda_u du, truncated at 1 - eps_s when gamma >= 1.
double stretched_time(const WeightSchedule& sch, double t, double eps_s);

enum class Method { Vanilla, Gd, Tocflow, Gn, GnApprox, TerminalProjection };
Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct GuidanceConfig {
  Method method = Method::Tocflow;
  int k = 4;
  double eta = 0.1;
  WeightSchedule schedule;
  double cg_tol = 1e-8;
  int cg_max = 0;  // 0 means min(r, 100)
  int proj_budget = 1000;
  int proj_inner_cg = 20;
  double proj_damping = 1e-12;
  double eps_s = -1.0;  // negative means the sampler step
};

Vec gd_solve(const VelocityField& f, const Constraint& c, const Vec& x, double t, int k);
Vec toc_solve(const VelocityField& f, const Constraint& c, const Vec& x, double t, int k, double s);
// Damping factor for the given pullback gradient and squared residual; 0 when r2 == 0.
double toc_damping(double s, double g2, double r2);

struct GnResult {
  Vec grad;
  bool converged = true;
  int iterations = 0;
};
GnResult gn_solve(const VelocityField& f, const Constraint& c, const Vec& x, double t, int k,
                  double s, double cg_tol = 1e-8, int cg_max = 0);

Vec terminal_project(const Constraint& c, const Vec& x1, int budget, int inner_cg,
                     double damping = 1e-12);

Vec gn_approx_step(const VelocityField& f, const Constraint& c, const Vec& x0, const Vec& xt,
                   double t, double dt, int k, int budget, int inner_cg, double damping = 1e-12);

}  // namespace tocflow
