#include "sibyl/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <initializer_list>
#include <map>
#include <sstream>

#include "sibyl/errors.hpp"

namespace sibyl {

using nlohmann::json;

std::vector<DeviceConfig> default_devices() {
  return {{device_preset("H"), 0.1}, {device_preset("M"), std::nullopt}};
}

std::vector<DeviceConfig> default_tri_devices() {
  return {{device_preset("H"), 0.05}, {device_preset("M"), 0.1}, {device_preset("L"), std::nullopt}};
}

void ExperimentConfig::validate() const {
  if (workload.trace_path.has_value() == workload.synth.has_value())
    throw InvalidParameter("exactly one workload source (trace or synth) is required");
  if (devices.empty() || devices.size() > 3)
    throw InvalidParameter("the device list must have 1 to 3 entries");
  for (const auto& d : devices)
    if (d.capacity_fraction && !(*d.capacity_fraction > 0.0 && *d.capacity_fraction <= 1.0))
      throw InvalidFraction("device " + d.spec.name + ": capacity fraction must be in (0, 1]");
  static const std::vector<std::string> known{"sibyl", "fast_only", "slow_only", "oracle",
                                              "cde",   "hps",       "tri_heuristic"};
  if (std::find(known.begin(), known.end(), policy) == known.end())
    throw InvalidParameter("unknown policy: " + policy);
  if (policy == "tri_heuristic" && devices.size() != 3)
    throw InvalidParameter("tri_heuristic needs three devices");
  if (!(jitter_sigma >= 0.0)) throw InvalidParameter("jitter must be non-negative");
  cde.validate();
  hps.validate();
  tri.validate();
  agent.validate();
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw InvalidParameter(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidParameter("unknown key " + where + "." + key);
  }
}

template <class T>
void take(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

template <class T>
void take(const json& obj, const char* key, std::optional<T>& out) {
  if (auto it = obj.find(key); it != obj.end()) {
    if (it->is_null())
      out.reset();
    else
      out = it->get<T>();
  }
}

DeviceConfig device_from_json(const json& j, std::size_t index) {
  const std::string where = "hss.devices." + std::to_string(index);
  reject_unknown(j,
                 {"preset", "name", "capacity_fraction", "capacity_pages", "read_base_us",
                  "write_base_us", "read_bw_mbps", "write_bw_mbps"},
                 where);
  DeviceConfig d;
  if (j.contains("preset")) {
    d.spec = device_preset(j.at("preset").get<std::string>());
  } else {
    for (const char* k : {"name", "read_base_us", "write_base_us", "read_bw_mbps", "write_bw_mbps"})
      if (!j.contains(k)) throw InvalidParameter(where + " needs a preset or " + k);
  }
  take(j, "name", d.spec.name);
  take(j, "read_base_us", d.spec.read_base_us);
  take(j, "write_base_us", d.spec.write_base_us);
  take(j, "read_bw_mbps", d.spec.read_bw_mbps);
  take(j, "write_bw_mbps", d.spec.write_bw_mbps);
  take(j, "capacity_pages", d.spec.capacity_pages);
  take(j, "capacity_fraction", d.capacity_fraction);
  return d;
}

AgentConfig agent_from_json(const json& j, AgentConfig a) {
  reject_unknown(j,
                 {"gamma", "alpha", "epsilon", "batch_size", "batches_per_step",
                  "buffer_capacity", "sync_period", "penalty_coeff", "action_count", "atoms",
                  "v_min", "v_max", "hidden", "seed", "learn", "concurrent"},
                 "agent");
  take(j, "gamma", a.gamma);
  take(j, "alpha", a.alpha);
  take(j, "epsilon", a.epsilon);
  take(j, "batch_size", a.batch_size);
  take(j, "batches_per_step", a.batches_per_step);
  take(j, "buffer_capacity", a.buffer_capacity);
  take(j, "sync_period", a.sync_period);
  take(j, "penalty_coeff", a.penalty_coeff);
  take(j, "action_count", a.action_count);
  take(j, "atoms", a.atoms);
  take(j, "v_min", a.v_min);
  take(j, "v_max", a.v_max);
  take(j, "hidden", a.hidden);
  take(j, "seed", a.seed);
  take(j, "learn", a.learn);
  take(j, "concurrent", a.concurrent);
  return a;
}

ExperimentConfig parse_config(const json& j) {
  reject_unknown(j,
                 {"label", "workload", "hss", "policy", "cde", "hps", "tri_heuristic", "agent",
                  "seed", "jitter", "normalize", "deterministic", "output", "report_json"},
                 "config");
  ExperimentConfig cfg;
  take(j, "label", cfg.label);
  take(j, "seed", cfg.seed);
  take(j, "policy", cfg.policy);
  take(j, "normalize", cfg.normalize);
  take(j, "deterministic", cfg.deterministic);
  take(j, "output", cfg.output);
  take(j, "report_json", cfg.report_json);
  if (auto it = j.find("jitter"); it != j.end()) {
    if (it->is_boolean())
      cfg.jitter_sigma = it->get<bool>() ? 0.05 : 0.0;
    else
      cfg.jitter_sigma = it->get<double>();
  }

  if (!j.contains("workload")) throw InvalidParameter("config needs a workload");
  const json& w = j.at("workload");
  reject_unknown(w, {"trace", "disk", "synth", "page_size"}, "workload");
  take(w, "trace", cfg.workload.trace_path);
  take(w, "disk", cfg.workload.disk);
  take(w, "page_size", cfg.workload.page_size);
  if (auto it = w.find("synth"); it != w.end()) {
    reject_unknown(*it, {"kind", "n", "pages", "seed"}, "workload.synth");
    SynthSpec s;
    if (it->contains("kind")) s.kind = parse_synth_kind(it->at("kind").get<std::string>());
    take(*it, "n", s.n);
    take(*it, "pages", s.pages);
    take(*it, "seed", s.seed);
    cfg.workload.synth = s;
  }

  cfg.devices = default_devices();
  if (auto it = j.find("hss"); it != j.end()) {
    reject_unknown(*it, {"devices"}, "hss");
    if (auto d = it->find("devices"); d != it->end()) {
      if (!d->is_array()) throw InvalidParameter("hss.devices must be an array");
      cfg.devices.clear();
      for (std::size_t i = 0; i < d->size(); ++i)
        cfg.devices.push_back(device_from_json((*d)[i], i));
    }
  }

  if (auto it = j.find("cde"); it != j.end()) {
    reject_unknown(*it, {"random_size_threshold_pages", "hot_threshold"}, "cde");
    take(*it, "random_size_threshold_pages", cfg.cde.random_size_threshold_pages);
    take(*it, "hot_threshold", cfg.cde.hot_threshold);
  }
  if (auto it = j.find("hps"); it != j.end()) {
    reject_unknown(*it, {"epoch_requests", "hot_threshold"}, "hps");
    take(*it, "epoch_requests", cfg.hps.epoch_requests);
    take(*it, "hot_threshold", cfg.hps.hot_threshold);
  }
  if (auto it = j.find("tri_heuristic"); it != j.end()) {
    reject_unknown(*it, {"hot_threshold_hi", "hot_threshold_lo"}, "tri_heuristic");
    take(*it, "hot_threshold_hi", cfg.tri.hot_threshold_hi);
    take(*it, "hot_threshold_lo", cfg.tri.hot_threshold_lo);
  }

  AgentConfig agent;
  agent.seed = cfg.seed;
  agent.action_count = static_cast<int>(cfg.devices.size());
  if (auto it = j.find("agent"); it != j.end()) agent = agent_from_json(*it, agent);
  cfg.agent = agent;
  if (cfg.deterministic) cfg.agent.concurrent = false;
  if (cfg.label.empty()) cfg.label = cfg.policy;
  return cfg;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config(j);
  } catch (const json::exception& e) {
    throw InvalidParameter(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidParameter("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void set_dotted(json& j, const std::string& path, const json& value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw InvalidParameter("bad key path: " + path);
    json* child;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        throw InvalidParameter("key path " + path + ": '" + key + "' is not an index");
      }
      if (idx >= node->size()) throw InvalidParameter("key path " + path + ": index out of range");
      child = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw InvalidParameter("key path " + path + " crosses a value");
      child = &(*node)[key];
    }
    if (dot == std::string::npos) {
      *child = value;
      return;
    }
    node = child;
    start = dot + 1;
  }
}

Workload load_workload(const WorkloadSource& src) {
  if (src.trace_path) return load_msrc(*src.trace_path, src.page_size, src.disk);
  if (!src.synth) throw InvalidParameter("no workload source");
  return synth_trace(src.synth->kind, src.synth->n, src.synth->pages, src.synth->seed,
                     src.page_size);
}

std::vector<DeviceSpec> resolve_devices(const std::vector<DeviceConfig>& devices,
                                        const WorkloadStats& stats) {
  std::vector<DeviceSpec> out;
  for (const auto& d : devices) {
    DeviceSpec spec = d.spec;
    if (d.capacity_fraction) spec.capacity_pages = fast_capacity_for(stats, *d.capacity_fraction);
    out.push_back(std::move(spec));
  }
  return out;
}

std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg, const HybridStorage& storage) {
  const auto& p = cfg.policy;
  if (p == "sibyl") return std::make_unique<SibylPolicy>(cfg.agent, storage, cfg.binning);
  if (p == "fast_only") return std::make_unique<FastOnlyPolicy>();
  if (p == "slow_only") return std::make_unique<SlowOnlyPolicy>();
  if (p == "oracle") return std::make_unique<OraclePolicy>();
  if (p == "cde") return std::make_unique<CdePolicy>(cfg.cde);
  if (p == "hps") return std::make_unique<HpsPolicy>(cfg.hps);
  if (p == "tri_heuristic") return std::make_unique<TriHeuristicPolicy>(cfg.tri);
  throw InvalidParameter("unknown policy: " + p);
}

std::vector<ServiceOutcome> replay(const Workload& w, HybridStorage& storage, Policy& policy,
                                   const ReplayOptions& opt) {
  std::optional<FutureIndex> future;
  if (policy.needs_future() || policy.victims() == VictimPolicy::Belady) {
    future.emplace(w);
    storage.set_future(&*future);
  }
  storage.set_jitter(opt.jitter_sigma, opt.jitter_seed);

  std::vector<ServiceOutcome> outcomes;
  outcomes.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const RequestContext ctx{w, i, storage, future ? &*future : nullptr};
    const auto decision = policy.decide(ctx);
    auto outcome = storage.apply_placement(w[i], decision.target_device, policy.victims(), i);
    policy.after_request(ctx, storage, outcome);
    if (opt.check_invariants) storage.check_invariants();
    outcomes.push_back(outcome);
  }
  storage.set_future(nullptr);
  return outcomes;
}

MetricsReport summarize(const std::vector<ServiceOutcome>& outcomes, std::size_t device_count,
                        std::size_t begin, std::size_t end) {
  end = std::min(end, outcomes.size());
  MetricsReport r;
  r.served.assign(device_count, 0);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& o = outcomes[i];
    r.total_latency_us += o.latency_us;
    if (o.eviction_occurred) ++r.eviction_count;
    r.evicted_pages += o.evicted_pages;
    ++r.served.at(o.device);
  }
  r.total_requests = end > begin ? end - begin : 0;
  if (r.total_requests > 0) {
    const auto n = static_cast<double>(r.total_requests);
    r.avg_request_latency_us = r.total_latency_us / n;
    r.iops = r.total_latency_us > 0 ? n / (r.total_latency_us * 1e-6) : 0.0;
    r.eviction_fraction = static_cast<double>(r.eviction_count) / n;
    r.fast_preference = static_cast<double>(r.served[0]) / n;
  }
  return r;
}

namespace {

std::uint64_t jitter_seed(const ExperimentConfig& cfg) { return cfg.seed * 0x9e3779b97f4a7c15ull + 17; }

}  // namespace

RunResult run_detailed(const ExperimentConfig& cfg, const Workload& w) {
  if (w.empty()) throw EmptyWorkload("workload has no requests");
  const auto stats = workload_stats(w);
  auto specs = resolve_devices(cfg.devices, stats);
  // The single-device baselines run on an unbounded target device.
  if (cfg.policy == "fast_only") specs.front().capacity_pages.reset();
  if (cfg.policy == "slow_only") specs.back().capacity_pages.reset();
  const ReplayOptions opt{cfg.jitter_sigma, jitter_seed(cfg), false};

  HybridStorage storage(specs, w.page_size);
  auto policy = make_policy(cfg, storage);
  RunResult result;
  result.outcomes = replay(w, storage, *policy, opt);
  result.report = summarize(result.outcomes, specs.size());
  result.report.label = cfg.label;
  result.report.policy = cfg.policy;
  if (auto* sibyl = dynamic_cast<SibylPolicy*>(policy.get())) {
    sibyl->agent().finish();
    result.report.train_events = sibyl->agent().train_events();
    result.report.loss_curve = sibyl->agent().losses();
  }

  if (cfg.normalize) {
    auto fast_specs = specs;
    fast_specs[0].capacity_pages.reset();
    HybridStorage fast_storage(fast_specs, w.page_size);
    FastOnlyPolicy fast;
    const auto base = summarize(replay(w, fast_storage, fast, opt), fast_specs.size());
    result.report.normalized_latency =
        result.report.avg_request_latency_us / base.avg_request_latency_us;
    result.report.normalized_iops = result.report.iops / base.iops;
  }
  return result;
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const Workload& w) {
  return run_detailed(cfg, w).report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, load_workload(cfg.workload));
}

std::vector<MetricsReport> sweep(const json& base, const json& grid, std::size_t jobs) {
  if (!grid.is_object() || grid.empty()) throw InvalidParameter("sweep grid must be a non-empty object");
  std::vector<std::pair<std::string, std::vector<json>>> axes;
  bool touches_workload = false;
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty())
      throw InvalidParameter("grid key " + key + " needs a non-empty array");
    axes.emplace_back(key, std::vector<json>(values.begin(), values.end()));
    touches_workload = touches_workload || key.rfind("workload", 0) == 0;
  }

  std::vector<ExperimentConfig> configs;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    json doc = base;
    std::string suffix;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      set_dotted(doc, axes[a].first, axes[a].second[idx[a]]);
      suffix += (a ? "," : "") + axes[a].first + "=" + axes[a].second[idx[a]].dump();
    }
    auto cfg = config_from_json(doc);
    cfg.label += "[" + suffix + "]";
    configs.push_back(std::move(cfg));
    std::size_t a = axes.size();
    while (a > 0 && ++idx[a - 1] == axes[a - 1].second.size()) idx[--a] = 0;
    if (a == 0) break;
  }

  std::optional<Workload> shared;
  if (!touches_workload) shared = load_workload(configs.front().workload);
  auto run_one = [&](std::size_t i) {
    if (shared) return run_experiment(configs[i], *shared);
    return run_experiment(configs[i]);
  };

  std::vector<MetricsReport> reports(configs.size());
  jobs = std::max<std::size_t>(1, jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) reports[i] = run_one(i);
    return reports;
  }
  for (std::size_t start = 0; start < configs.size(); start += jobs) {
    std::vector<std::future<MetricsReport>> lane;
    for (std::size_t i = start; i < std::min(configs.size(), start + jobs); ++i)
      lane.push_back(std::async(std::launch::async, run_one, i));
    for (std::size_t k = 0; k < lane.size(); ++k) reports[start + k] = lane[k].get();
  }
  return reports;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string csv_header() {
  return "label,policy,total_requests,avg_request_latency_us,total_latency_us,"
         "normalized_latency,iops,normalized_iops,eviction_count,evicted_pages,"
         "eviction_fraction,fast_preference,served_0,served_1,served_2,train_events,"
         "final_loss";
}

std::string csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << quoted(r.label) << ',' << r.policy << ',' << r.total_requests << ','
     << num(r.avg_request_latency_us) << ',' << num(r.total_latency_us) << ','
     << (r.normalized_latency ? num(*r.normalized_latency) : "") << ',' << num(r.iops) << ','
     << (r.normalized_iops ? num(*r.normalized_iops) : "") << ',' << r.eviction_count << ','
     << r.evicted_pages << ',' << num(r.eviction_fraction) << ',' << num(r.fast_preference);
  for (std::size_t d = 0; d < 3; ++d) {
    os << ',';
    if (d < r.served.size()) os << r.served[d];
  }
  os << ',' << r.train_events << ',' << (r.loss_curve.empty() ? "" : num(r.loss_curve.back()));
  return os.str();
}

std::string to_csv(const std::vector<MetricsReport>& reports) {
  std::string out = csv_header() + "\n";
  for (const auto& r : reports) out += csv_row(r) + "\n";
  return out;
}

json to_json(const MetricsReport& r) {
  json j;
  j["label"] = r.label;
  j["policy"] = r.policy;
  j["total_requests"] = r.total_requests;
  j["avg_request_latency_us"] = r.avg_request_latency_us;
  j["total_latency_us"] = r.total_latency_us;
  j["normalized_latency"] = r.normalized_latency ? json(*r.normalized_latency) : json();
  j["iops"] = r.iops;
  j["normalized_iops"] = r.normalized_iops ? json(*r.normalized_iops) : json();
  j["eviction_count"] = r.eviction_count;
  j["evicted_pages"] = r.evicted_pages;
  j["eviction_fraction"] = r.eviction_fraction;
  j["fast_preference"] = r.fast_preference;
  j["served"] = r.served;
  j["train_events"] = r.train_events;
  j["loss_curve"] = r.loss_curve;
  return j;
}

}  // namespace sibyl
