#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tocflow/guidance.hpp"

namespace tocflow {

enum class Integrator { Euler, Heun };
Integrator integrator_from_string(const std::string& s);
std::string to_string(Integrator i);

struct SamplerConfig {
  int steps = 200;
  Integrator integrator = Integrator::Heun;
  bool scale_control_by_dt = true;
  GuidanceConfig guidance;
  int n_samples = 1;
  std::uint64_t seed = 0;
  int threads = 0;        // 0 means TOCFLOW_THREADS or hardware concurrency
  bool keep_states = false;
};

struct SampleDiverged : std::runtime_error {
  SampleDiverged(const std::string& msg, int step) : std::runtime_error(msg), step(step) {}
  int step;
};

// Starts from the provided x0.
Vec sample_from(const VelocityField& f, const Constraint& c, const SamplerConfig& cfg, const Vec& x0);
Vec sample_one(const VelocityField& f, const Constraint& c, const SamplerConfig& cfg, RngStream& rng);

struct Summary {
  double median = 0, geomean = 0, mean = 0, p5 = 0, p50 = 0, p95 = 0;
  int divergences = 0;
  int count = 0;
};
Summary summarize(const std::vector<double>& costs, const std::vector<bool>& diverged);

struct RunReport {
  std::vector<double> terminal_cost;
  std::vector<double> residual_norm;
  std::vector<double> wallclock_ms;
  std::vector<bool> diverged;
  std::vector<Vec> states;  // empty unless keep_states
  std::map<std::string, std::vector<double>> extra;
  Summary summary;
  void finalize() { summary = summarize(terminal_cost, diverged); }
};

RunReport sample_batch(const VelocityField& f, const Constraint& c, const SamplerConfig& cfg,
                       std::uint64_t seed);

int worker_count(int requested);
// Runs body(i) for i in [0, n) across workers; order of completion is irrelevant to results.
void parallel_for(int n, int workers, const std::function<void(int)>& body);

}  // namespace tocflow
