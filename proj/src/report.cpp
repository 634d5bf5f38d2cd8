#include <cmath>
#include <fstream>
#include <iomanip>

#include "tocflow/io.hpp"

namespace tocflow {

namespace {

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << std::setprecision(17);
  return out;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

json summary_to_json(const Summary& s) {
  return {{"median", num(s.median)}, {"geomean", num(s.geomean)}, {"mean", num(s.mean)},
          {"p5", num(s.p5)},         {"p50", num(s.p50)},         {"p95", num(s.p95)},
          {"divergences", s.divergences}, {"count", s.count}};
}

void write_report_csv(const RunReport& r, const fs::path& file) {
  auto out = open_out(file);
  out << "sample_id,terminal_cost,residual_norm,wallclock_ms";
  for (const auto& [name, col] : r.extra) out << "," << name;
  out << "\n";
  for (std::size_t i = 0; i < r.terminal_cost.size(); ++i) {
    out << i << "," << r.terminal_cost[i] << "," << r.residual_norm[i] << "," << r.wallclock_ms[i];
    for (const auto& [name, col] : r.extra) out << "," << col.at(i);
    out << "\n";
  }
  if (!out) throw IoError("short write to " + file.string());
}

void emit_report(const RunReport& r, const fs::path& dir, bool dump_states) {
  fs::create_directories(dir);
  write_report_csv(r, dir / "report.csv");
  write_json(summary_to_json(r.summary), dir / "summary.json");
  if (dump_states && !r.states.empty()) {
    Eigen::Index d = 0;
    for (const auto& s : r.states) d = std::max(d, s.size());
    std::vector<Vec> rows;
    for (const auto& s : r.states) rows.push_back(s.size() ? s : Vec::Constant(d, std::nan("")));
    write_array(dir / "states", rows, {{"content", "terminal states"}});
  }
}

void write_trace_csv(const TrainTrace& t, const fs::path& file) {
  auto out = open_out(file);
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < t.loss.size(); ++i) out << i << "," << t.loss[i] << "\n";
}

void write_fig1_csv(const std::vector<Fig1Row>& rows, const fs::path& file) {
  auto out = open_out(file);
  out << "lambda,exact,gd,toc\n";
  for (const auto& r : rows) out << r.lambda << "," << r.exact << "," << r.gd << "," << r.toc << "\n";
}

}  // namespace tocflow
