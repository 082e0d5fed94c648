// sibylsim: command-line front end for the hybrid storage simulator.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sibyl/errors.hpp"
#include "sibyl/harness.hpp"
#include "sibyl/trace.hpp"

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sibyl::InvalidParameter("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw sibyl::InvalidParameter(path + ": " + e.what());
  }
}

void emit(const std::string& text, const std::optional<std::string>& path) {
  if (!path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*path, std::ios::binary);
  if (!out) throw sibyl::InvalidParameter("cannot write " + *path);
  out << text;
}

void emit_json(const json& j, const std::optional<std::string>& path) {
  if (path) emit(j.dump(2) + "\n", path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid storage simulator with an RL data-placement agent"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> policy;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::string> out_path;
  auto* run = app.add_subcommand("run", "Replay one experiment");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--policy", policy, "Override the policy name");
  run->add_option("--seed", seed, "Override the experiment seed");
  run->add_flag("--deterministic", deterministic, "Force single-lane deterministic mode");
  run->add_option("--out", out_path, "CSV output file (default: stdout)");

  std::string grid_path;
  std::size_t jobs = 1;
  auto* sw = app.add_subcommand("sweep", "Run a parameter grid");
  sw->add_option("--config", config_path, "Base experiment config (JSON)")->required();
  sw->add_option("--grid", grid_path, "Grid file: dotted key -> array of values")->required();
  sw->add_option("--jobs", jobs, "Grid points run in parallel")->check(CLI::PositiveNumber);
  sw->add_option("--out", out_path, "CSV output file (default: stdout)");

  std::string trace_path;
  std::uint64_t page_size = sibyl::kDefaultPageSize;
  std::optional<int> disk;
  auto* stats = app.add_subcommand("stats", "Print workload statistics of a trace");
  stats->add_option("--trace", trace_path, "MSRC CSV trace")->required();
  stats->add_option("--page-size", page_size, "Page size in bytes");
  stats->add_option("--disk", disk, "Keep only this disk number");

  std::string kind;
  std::uint64_t n = 0;
  std::uint64_t pages = 0;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic MSRC trace");
  synth->add_option("--kind", kind, "hot_random | cold_sequential | mixed")->required();
  synth->add_option("--n", n, "Number of requests")->required();
  synth->add_option("--pages", pages, "Page range")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", out_path, "Output trace (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      json doc = read_json(config_path);
      if (policy) doc["policy"] = *policy;
      if (seed) doc["seed"] = *seed;
      if (deterministic) doc["deterministic"] = true;
      const auto cfg = sibyl::config_from_json(doc);
      const auto report = sibyl::run_experiment(cfg);
      emit(sibyl::to_csv({report}), out_path ? out_path : cfg.output);
      emit_json(sibyl::to_json(report), cfg.report_json);
    } else if (*sw) {
      const json base = read_json(config_path);
      const json grid = read_json(grid_path);
      const auto reports = sibyl::sweep(base, grid, jobs);
      const auto cfg = sibyl::config_from_json(base);
      emit(sibyl::to_csv(reports), out_path ? out_path : cfg.output);
      if (cfg.report_json) {
        json all = json::array();
        for (const auto& r : reports) all.push_back(sibyl::to_json(r));
        emit_json(all, cfg.report_json);
      }
    } else if (*stats) {
      const auto w = sibyl::load_msrc(trace_path, page_size, disk);
      const auto s = sibyl::workload_stats(w);
      std::printf("total_requests %llu\n", static_cast<unsigned long long>(s.total_requests));
      std::printf("write_fraction %.6f\n", s.write_fraction);
      std::printf("read_fraction %.6f\n", s.read_fraction);
      std::printf("avg_request_size_pages %.6f\n", s.avg_request_size_pages);
      std::printf("avg_access_count %.6f\n", s.avg_access_count);
      std::printf("unique_pages %llu\n", static_cast<unsigned long long>(s.unique_pages));
      std::printf("working_set_pages %llu\n",
                  static_cast<unsigned long long>(s.working_set_pages));
    } else if (*synth) {
      const auto w = sibyl::synth_trace(sibyl::parse_synth_kind(kind), n, pages, synth_seed);
      std::ostringstream os;
      sibyl::write_msrc(os, w);
      emit(os.str(), out_path);
    }
  } catch (const sibyl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sibyl::TraceError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
