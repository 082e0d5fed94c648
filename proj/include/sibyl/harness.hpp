#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sibyl/agent.hpp"
#include "sibyl/features.hpp"
#include "sibyl/hss.hpp"
#include "sibyl/policies.hpp"
#include "sibyl/trace.hpp"

namespace sibyl {

struct SynthSpec {
  SynthKind kind = SynthKind::HotRandom;
  std::uint64_t n = 10000;
  std::uint64_t pages = 1000;
  std::uint64_t seed = 1;
};

struct WorkloadSource {
  std::optional<std::string> trace_path;
  std::optional<int> disk;
  std::optional<SynthSpec> synth;
  std::uint64_t page_size = kDefaultPageSize;
};

struct DeviceConfig {
  DeviceSpec spec;
  /// Capacity as a fraction of the workload's working set; overrides
  /// spec.capacity_pages when set.
  std::optional<double> capacity_fraction;
};

struct ExperimentConfig {
  std::string label;
  WorkloadSource workload;
  std::vector<DeviceConfig> devices;
  std::string policy = "sibyl";
  CdeConfig cde;
  HpsConfig hps;
  TriHeuristicConfig tri;
  AgentConfig agent;
  BinningConfig binning;
  std::uint64_t seed = 1;
  double jitter_sigma = 0.0;
  bool normalize = true;
  bool deterministic = true;
  std::optional<std::string> output;
  std::optional<std::string> report_json;

  /// Throws ConfigError subclasses.
  void validate() const;
};

/// H at 10% of the working set over M, the performance-oriented pair.
std::vector<DeviceConfig> default_devices();
/// H at 5% and M at 10% of the working set over L.
std::vector<DeviceConfig> default_tri_devices();

/// Builds a config from JSON. Unknown keys are rejected. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Sets a dotted key path ("agent.gamma", "hss.devices.0.capacity_fraction")
/// in a JSON document, creating objects on the way.
void set_dotted(nlohmann::json& j, const std::string& path, const nlohmann::json& value);

Workload load_workload(const WorkloadSource& src);

/// Device specs with fractional capacities resolved against `stats`.
std::vector<DeviceSpec> resolve_devices(const std::vector<DeviceConfig>& devices,
                                        const WorkloadStats& stats);

std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg, const HybridStorage& storage);

struct ReplayOptions {
  double jitter_sigma = 0.0;
  std::uint64_t jitter_seed = 0;
  bool check_invariants = false;
};

/// Runs every request of `w` through `policy` on `storage` and returns the
/// per-request outcomes.
std::vector<ServiceOutcome> replay(const Workload& w, HybridStorage& storage, Policy& policy,
                                   const ReplayOptions& opt = {});

struct MetricsReport {
  std::string label;
  std::string policy;
  std::uint64_t total_requests = 0;
  double total_latency_us = 0.0;
  double avg_request_latency_us = 0.0;
  double iops = 0.0;
  std::optional<double> normalized_latency;
  std::optional<double> normalized_iops;
  /// Requests whose service involved at least one eviction.
  std::uint64_t eviction_count = 0;
  std::uint64_t evicted_pages = 0;
  double eviction_fraction = 0.0;
  /// Share of requests placed on the fastest device.
  double fast_preference = 0.0;
  std::vector<std::uint64_t> served;
  std::size_t train_events = 0;
  std::vector<double> loss_curve;
};

/// Metrics over outcomes[begin, end).
MetricsReport summarize(const std::vector<ServiceOutcome>& outcomes, std::size_t device_count,
                        std::size_t begin = 0,
                        std::size_t end = static_cast<std::size_t>(-1));

struct RunResult {
  MetricsReport report;
  std::vector<ServiceOutcome> outcomes;
};

/// Replays `w` under cfg.policy, plus a Fast-Only run on unbounded fast
/// storage when cfg.normalize is set. fast_only and slow_only always run with
/// their target device unbounded.
RunResult run_detailed(const ExperimentConfig& cfg, const Workload& w);
MetricsReport run_experiment(const ExperimentConfig& cfg, const Workload& w);
MetricsReport run_experiment(const ExperimentConfig& cfg);

/// One report per point of the Cartesian product of `grid` (dotted key ->
/// array of values), in key order with the last key varying fastest. The
/// workload is loaded once when no grid key touches it.
std::vector<MetricsReport> sweep(const nlohmann::json& base, const nlohmann::json& grid,
                                 std::size_t jobs = 1);

std::string csv_header();
std::string csv_row(const MetricsReport& r);
std::string to_csv(const std::vector<MetricsReport>& reports);
nlohmann::json to_json(const MetricsReport& r);

}  // namespace sibyl
