#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tocflow/constraints.hpp"
#include "tocflow/fields.hpp"
#include "tocflow/sampler.hpp"

namespace tocflow {

using json = nlohmann::json;

struct GPTrajectorySpec {
  int n_x = 64;
  double variance = 0.4;
  double length = 0.1;
  double jitter = 1e-8;
};

struct KernelNotPSD : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Mat gp_kernel(const GPTrajectorySpec& spec);
GaussianMixtureField gen_gp_mixture_field(const GPTrajectorySpec& spec);

struct CorridorSpec {
  int n_spans = 4;
  double range_lo = -6.0, range_hi = 6.0;
  double width_min = 0.12, width_max = 0.25;  // fractions of the lateral range
  int span_min = 0, span_max = 0;             // 0 picks n_x/16 and n_x/8
};

CorridorConstraint gen_corridors(const GPTrajectorySpec& spec, RngStream& rng,
                                 const CorridorSpec& cs = {});

// Max absolute discrete second difference.
double kink_metric(const Vec& f);

struct DarcyGenSpec {
  int n = 16;
  int modes = 32;
  double length = 0.1;
  DarcySource source;
  double cg_tol = 1e-10;
};

struct KLBasis {
  Mat phi;  // n^2 x s, orthonormal columns
  Vec sqrt_lambda;
};

KLBasis darcy_kl_basis(const DarcyGenSpec& spec);

struct PressureSolve {
  Vec p;
  bool converged = false;
  int iterations = 0;
};
// Least-squares pressure for fixed K: interior, boundary and mean rows with equal weight.
PressureSolve darcy_pressure_solve(const DarcyConstraint& c, const Vec& k, double tol);
Vec darcy_state_from_z(const DarcyGenSpec& spec, const KLBasis& basis, const DarcyConstraint& c,
                       const Vec& z, bool* converged = nullptr);
std::vector<Vec> gen_darcy_pairs(const DarcyGenSpec& spec, RngStream& rng, int count);

struct SpectrumGenSpec {
  int n = 64;
  double beta = 5.0 / 3.0;
  double amplitude = 64.0;
};
Vec gen_spectrum_field(const SpectrumGenSpec& spec, RngStream& rng);

GaussianMixtureField fit_gaussian_reference(const std::vector<Vec>& samples, double jitter = 1e-6);

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
};

struct TaskResult {
  std::map<std::string, RunReport> reports;
  std::vector<Check> checks;
  json summary;
  bool pass() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Defaults for each named task; user configs are merged over these and unknown keys rejected.
json default_config(const std::string& task);
json merge_config(const std::string& task, const json& user);
SamplerConfig sampler_from_json(const json& cfg);
GuidanceConfig guidance_from_json(const json& g);

TaskResult run_experiment(const std::string& name, const json& config);
TaskResult run_gaussian(const json& cfg);
TaskResult run_fig1(const json& cfg);
TaskResult run_proximal_check(const json& cfg);
TaskResult run_trajectory(const json& cfg);
TaskResult run_darcy(const json& cfg);
TaskResult run_spectrum(const json& cfg);
TaskResult run_fm(const json& cfg);
TaskResult run_gradcheck(const json& cfg);

// 1-D closed loop with the affine reference field and h(x) = x, written on scalars.
double sample_affine_1d(double mu, double sigma, const SamplerConfig& cfg, double x0);

}  // namespace tocflow
