#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "tocflow/experiments.hpp"
#include "tocflow/io.hpp"

using namespace tocflow;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

json load_config(const std::string& path) {
  if (path.empty()) return json();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // nlohmann reports the byte offset; recover line and column from it.
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("malformed JSON in " + path + " at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
}

// Seed override target per task.
void apply_seed(const std::string& task, json& cfg, std::uint64_t seed) {
  if (task == "gaussian") cfg["mc"]["seed"] = seed;
  else if (task == "trajectory" || task == "darcy" || task == "spectrum") cfg["sampler"]["seed"] = seed;
  else if (task == "gen-data") cfg["darcy"]["seed"] = cfg["spectrum"]["seed"] = seed;
  else if (task != "fig1") cfg["seed"] = seed;
}

void write_checks_csv(const std::vector<Check>& checks, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << std::setprecision(17) << "check,value,threshold,pass\n";
  for (const auto& c : checks) out << c.name << "," << c.value << "," << c.threshold << "," << (c.pass ? 1 : 0) << "\n";
}

void write_manifest(const std::string& sub, const json& cfg, const Options& o, const fs::path& dir) {
  json m;
  m["subcommand"] = sub;
  m["config"] = cfg;
  m["seed_override"] = o.seed ? json(*o.seed) : json(nullptr);
  m["versions"] = {{"tocflow", kVersion}, {"compiler", __VERSION__}, {"cxx_standard", __cplusplus}};
  const char* threads = std::getenv("TOCFLOW_THREADS");
  m["env"] = {{"TOCFLOW_THREADS", threads ? json(threads) : json(nullptr)}};
  write_json(m, dir / "manifest.json");
}

std::string task_of(const std::string& sub) {
  if (sub == "gaussian-verify") return "gaussian";
  if (sub == "proximal-check") return "proximal_check";
  if (sub == "fm-train") return "fm";
  return sub;
}

int gen_data(const json& cfg, const fs::path& out, bool quiet) {
  for (const auto& which : cfg.at("which")) {
    if (which == "darcy") {
      const json& d = cfg.at("darcy");
      DarcyGenSpec spec;
      spec.n = d.at("n");
      spec.modes = d.at("modes");
      spec.length = d.at("length");
      RngStream rng(d.at("seed").get<std::uint64_t>(), 0);
      const auto rows = gen_darcy_pairs(spec, rng, d.at("count"));
      write_array(out / "darcy_pairs", rows, {{"content", "darcy [logK; p] states"}, {"generator", d}});
      if (!quiet) std::cout << "wrote " << rows.size() << " darcy pairs\n";
    } else if (which == "spectrum") {
      const json& s = cfg.at("spectrum");
      SpectrumGenSpec spec{s.at("n"), s.at("beta"), s.at("amplitude")};
      RngStream rng(s.at("seed").get<std::uint64_t>(), 0);
      std::vector<Vec> rows;
      for (int i = 0; i < s.at("count").get<int>(); ++i) rows.push_back(gen_spectrum_field(spec, rng));
      write_array(out / "spectrum_fields", rows, {{"content", "vorticity fields"}, {"generator", s}});
      if (!quiet) std::cout << "wrote " << rows.size() << " spectrum fields\n";
    } else {
      throw ConfigError("gen-data: unknown dataset '" + which.get<std::string>() + "'");
    }
  }
  return 0;
}

int run(const std::string& sub, const Options& o) {
  const std::string task = task_of(sub);
  json cfg = merge_config(task, load_config(o.config));
  if (o.seed) {
    apply_seed(task, cfg, *o.seed);
    cfg = merge_config(task, cfg);
  }
  const fs::path out = o.out;
  fs::create_directories(out);
  write_manifest(sub, cfg, o, out);
  if (task == "gen-data") return gen_data(cfg, out, o.quiet);

  const TaskResult res = run_experiment(task, cfg);
  for (const auto& [name, rep] : res.reports) {
    const bool dump = cfg.contains("dump_states") && cfg.at("dump_states").get<bool>();
    emit_report(rep, out / name, dump);
  }
  write_checks_csv(res.checks, out / "report.csv");
  json summary = res.summary;
  if (task == "fig1") {
    std::vector<Fig1Row> rows;
    for (const auto& r : res.summary.at("rows")) rows.push_back({r[0], r[1], r[2], r[3]});
    write_fig1_csv(rows, out / "fig1.csv");
  }
  if (task == "fm") {
    TrainTrace t;
    t.loss = summary.at("trace").get<std::vector<double>>();
    write_trace_csv(t, out / "trace.csv");
    write_json(summary.at("field"), out / "field.json");
    summary.erase("trace");
    summary.erase("field");
  }
  write_json(summary, out / "summary.json");
  if (!o.quiet) {
    for (const auto& c : res.checks)
      std::cout << (c.pass ? "ok   " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold
                << "\n";
    std::cout << (res.pass() ? "all checks passed" : "some checks failed") << "\n";
  }
  return res.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tocflow benchmarks and oracle checks"};
  app.require_subcommand(1, 1);
  Options o;
  const std::vector<std::pair<std::string, std::string>> subs{
      {"gaussian-verify", "closed-form Gaussian oracle versus simulation"},
      {"fig1", "terminal std against the weight schedule"},
      {"proximal-check", "Gauss-Newton step versus brute-force proximal minimization"},
      {"trajectory", "GP mixture trajectories with corridor constraints"},
      {"darcy", "Darcy flow with a Gaussian reference field"},
      {"spectrum", "energy spectrum constraint on vorticity fields"},
      {"fm-train", "train a flow-matching MLP on N(2,1)"},
      {"gradcheck", "adjoint and finite-difference checks"},
      {"gen-data", "write Darcy and spectrum datasets"}};
  for (const auto& [name, desc] : subs) {
    auto* s = app.add_subcommand(name, desc);
    s->add_option("--config", o.config, "JSON config merged over the defaults");
    s->add_option("--out", o.out, "output directory");
    s->add_option("--seed", o.seed, "seed override");
    s->add_flag("--quiet", o.quiet, "suppress progress output");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    return run(sub, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
