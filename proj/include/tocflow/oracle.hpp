#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tocflow/guidance.hpp"

namespace tocflow {

struct Gaussian1DModel {
  double mu = 2.0;
  double sigma = 1.0;
  WeightSchedule schedule;
  double eps_s = 0.005;  // truncation used only when gamma >= 1

  double v(double t) const;
  double alpha(double t) const;
  double beta(double t) const;
  double lambda(double t) const { return schedule.lambda(t); }
  double s(double t) const { return stretched_time(schedule, t, eps_s); }
};

enum class Scheme { Exact, Gd, Tocflow };

struct OracleMoments {
  double mean = 0.0;
  double std = 0.0;
  Scheme scheme = Scheme::Exact;
};

// int_a^1 g(t) / lambda(t) dt with the endpoint singularity of (1-t)^-gamma removed by substitution.
double schedule_integral(const Gaussian1DModel& m, const std::function<double(double)>& g,
                         double a = 0.0, int n = 1024);

double gamma_lambda(const Gaussian1DModel& m);
double eta_lambda(const Gaussian1DModel& m);
OracleMoments exact_moments(const Gaussian1DModel& m);
OracleMoments scheme_moments(const Gaussian1DModel& m, Scheme scheme);

struct RiccatiState {
  double p = 1.0, q = 0.0, r = 0.0;
};
RiccatiState riccati(const Gaussian1DModel& m, double t);
double riccati_feedback(const Gaussian1DModel& m, double x, double t);

using ScalarFn = std::function<double(double)>;
// Integrates mdot = (alpha-kappa) m + beta - bias, Vdot = 2 (alpha-kappa) V from (0, 1) by Heun.
OracleMoments moment_simulate(const Gaussian1DModel& m, const ScalarFn& gain, const ScalarFn& bias,
                              int steps);

struct GainBias {
  ScalarFn gain, bias;
};
GainBias gd_gain(const Gaussian1DModel& m);
GainBias toc_gain(const Gaussian1DModel& m);
GainBias riccati_gain(const Gaussian1DModel& m);

struct EnergyCheck {
  double eulerian = 0.0;
  double comoving = 0.0;
};
EnergyCheck energy_equivalence_check(const Gaussian1DModel& m, int steps = 4096);

double w2_gaussian(double mu1, double s1, double mu2, double s2);

struct SandwichCheck {
  double lower = 0.0, achieved = 0.0, upper = 0.0;
  double c_minus = 0.0, c_plus = 0.0;
  bool holds() const { return lower <= achieved && achieved <= upper; }
};
SandwichCheck cost_sandwich(const Gaussian1DModel& m, int steps = 4096);

struct Fig1Row {
  double lambda, exact, gd, toc;
};
std::vector<Fig1Row> fig1_curve(double sigma, double mu, const std::vector<double>& lambdas);

}  // namespace tocflow
