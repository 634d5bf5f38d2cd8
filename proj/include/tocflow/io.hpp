#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tocflow/fields.hpp"
#include "tocflow/fm.hpp"
#include "tocflow/oracle.hpp"
#include "tocflow/sampler.hpp"

namespace tocflow {

using json = nlohmann::json;
namespace fs = std::filesystem;

json mixture_to_json(const GaussianMixtureField& f);
GaussianMixtureField mixture_from_json(const json& j);
json mlp_to_json(const NeuralMLPField& f);
NeuralMLPField mlp_from_json(const json& j);

// Rows of equal length stored as little-endian float64 in base.bin with a base.json sidecar.
void write_array(const fs::path& base, const std::vector<Vec>& rows, json meta = json::object());
std::vector<Vec> read_array(const fs::path& base, json* meta = nullptr);

json summary_to_json(const Summary& s);
void write_report_csv(const RunReport& r, const fs::path& file);
// report.csv, summary.json and, when requested, states.bin + states.json.
void emit_report(const RunReport& r, const fs::path& dir, bool dump_states = false);
void write_trace_csv(const TrainTrace& t, const fs::path& file);
void write_fig1_csv(const std::vector<Fig1Row>& rows, const fs::path& file);
void write_json(const json& j, const fs::path& file);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tocflow
