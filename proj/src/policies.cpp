#include "sibyl/policies.hpp"

#include <algorithm>
#include <limits>

#include "sibyl/errors.hpp"

namespace sibyl {

namespace {

std::uint64_t access_count_of(const HybridStorage& storage, std::uint64_t page) {
  const auto* e = storage.find(page);
  return e ? e->access_count : 0;
}

}  // namespace

namespace {

std::uint64_t incoming_pages(const HybridStorage& storage, const TraceRecord& req,
                             std::size_t dev) {
  std::uint64_t incoming = 0;
  for (std::uint64_t k = 0; k < req.size_pages; ++k) {
    const auto* e = storage.find(req.page_id + k);
    if (e == nullptr || e->device != dev) ++incoming;
  }
  return incoming;
}

PolicyDecision belady_greedy(const Workload& w, std::size_t index, const HybridStorage& storage,
                             const FutureIndex& future) {
  const auto& req = w[index];
  const std::size_t slow = storage.slowest();
  const std::size_t fast = storage.effective_target(0, req.size_pages);
  if (fast == slow) return {slow, "too_large"};

  const std::uint64_t incoming = incoming_pages(storage, req, fast);
  if (incoming == 0) return {fast, "resident"};

  const std::uint64_t next = future.next_use(index, 0);
  if (next == kNeverUsed) return {slow, "no_reuse"};

  const auto& dev = storage.device(fast);
  if (!dev.bounded() || dev.free_pages() >= incoming) return {fast, "reuse_fits"};
  const auto victim = storage.belady_victim(fast, req.page_id, req.size_pages);
  if (victim && next < victim->first) return {fast, "reuse_sooner"};
  return {slow, "reuse_later"};
}

// Never brings data into fast: resident requests stay, the rest go slow.
PolicyDecision lazy(const Workload& w, std::size_t index, const HybridStorage& storage,
                    const FutureIndex&) {
  const auto& req = w[index];
  const std::size_t fast = storage.effective_target(0, req.size_pages);
  if (incoming_pages(storage, req, fast) == 0) return {fast, "resident"};
  return {storage.slowest(), "lazy"};
}

using BaseRule = PolicyDecision (*)(const Workload&, std::size_t, const HybridStorage&,
                                    const FutureIndex&);

// Total latency of placing request `index` on `target` and then following
// each base rule for the next `horizon` requests; the cheaper continuation
// counts. Returns infinity once every continuation reaches `bound`.
// `sim` is scratch space; assigning into it reuses its allocations.
double rollout(const Workload& w, std::size_t index, std::size_t target,
               const HybridStorage& storage, HybridStorage& sim, const FutureIndex& future,
               std::size_t horizon, double bound) {
  const std::size_t end = std::min(w.size(), index + 1 + horizon);
  double best = bound;
  for (BaseRule rule : {belady_greedy, lazy}) {
    sim = storage;
    sim.set_jitter(0.0, 0);
    double total = sim.apply_placement(w[index], target, VictimPolicy::Belady, index).latency_us;
    for (std::size_t j = index + 1; j < end && total < best; ++j)
      total += sim.apply_placement(w[j], rule(w, j, sim, future).target_device,
                                   VictimPolicy::Belady, j)
                   .latency_us;
    best = std::min(best, total);
  }
  return best < bound ? best : std::numeric_limits<double>::infinity();
}

}  // namespace

OraclePolicy::OraclePolicy(std::size_t horizon) : horizon_(horizon) {}

PolicyDecision OraclePolicy::decide(const RequestContext& ctx) {
  const auto greedy = belady_greedy(ctx.workload, ctx.index, ctx.storage, *ctx.future);
  const auto& req = ctx.request();
  const auto& storage = ctx.storage;
  const std::size_t slow = storage.slowest();
  const std::size_t fast = storage.effective_target(0, req.size_pages);
  if (horizon_ == 0 || fast == slow || greedy.rationale_tag == "no_reuse") return greedy;
  // Anything that brings data into fast is settled by lookahead.

  if (incoming_pages(storage, req, fast) == 0) return greedy;

  if (!scratch_) scratch_.emplace(storage);
  const double inf = std::numeric_limits<double>::infinity();
  const double via_fast =
      rollout(ctx.workload, ctx.index, fast, storage, *scratch_, *ctx.future, horizon_, inf);
  const double via_slow =
      rollout(ctx.workload, ctx.index, slow, storage, *scratch_, *ctx.future, horizon_, via_fast);
  if (via_fast < via_slow) return {fast, "lookahead_fast"};
  if (via_slow < via_fast) return {slow, "lookahead_slow"};
  return greedy;
}

void CdeConfig::validate() const {
  if (random_size_threshold_pages < 1 || hot_threshold < 1)
    throw InvalidParameter("CDE thresholds must be >= 1");
}

CdePolicy::CdePolicy(CdeConfig cfg) : cfg_(cfg) { cfg_.validate(); }

PolicyDecision CdePolicy::decide(const RequestContext& ctx) {
  const auto& req = ctx.request();
  const std::size_t slow = ctx.storage.slowest();
  if (req.op == Op::Read) {
    const auto* e = ctx.storage.find(req.page_id);
    return {e ? e->device : slow, "read_stays"};
  }
  if (access_count_of(ctx.storage, req.page_id) >= cfg_.hot_threshold) return {0, "hot_write"};
  if (req.size_pages <= cfg_.random_size_threshold_pages) return {0, "random_write"};
  return {slow, "cold_sequential_write"};
}

void HpsConfig::validate() const {
  if (epoch_requests < 1) throw InvalidParameter("HPS epoch must be >= 1 request");
  if (hot_threshold < 1) throw InvalidParameter("HPS hot threshold must be >= 1");
}

std::vector<MigrationEvent> hps_epoch_migrate(HybridStorage& storage, const HpsConfig& cfg) {
  std::vector<MigrationEvent> events;
  if (storage.device_count() > 1) {
    for (auto page : storage.resident_pages(0))
      if (storage.find(page)->epoch_count < cfg.hot_threshold)
        events.push_back(storage.migrate(page, 1, VictimPolicy::LRU));
  }
  storage.reset_epoch_counts();
  return events;
}

HpsPolicy::HpsPolicy(HpsConfig cfg) : cfg_(cfg) { cfg_.validate(); }

PolicyDecision HpsPolicy::decide(const RequestContext& ctx) {
  const auto& req = ctx.request();
  std::size_t target = 0;
  bool seen = false;
  for (std::uint64_t k = 0; k < req.size_pages; ++k) {
    if (const auto* e = ctx.storage.find(req.page_id + k)) {
      seen = true;
      target = std::max<std::size_t>(target, e->device);
    }
  }
  return {target, seen ? "stays" : "new_data"};
}

void HpsPolicy::after_request(const RequestContext& ctx, HybridStorage& storage,
                              ServiceOutcome& outcome) {
  if ((ctx.index + 1) % cfg_.epoch_requests != 0) return;
  double cost = 0.0;
  const auto events = hps_epoch_migrate(storage, cfg_);
  for (const auto& ev : events) cost += ev.cost_us;
  if (events.empty()) return;
  outcome.eviction_occurred = true;
  outcome.evicted_pages += events.size();
  outcome.eviction_latency_us += cost;
  outcome.latency_us += cost;
}

void TriHeuristicConfig::validate() const {
  if (hot_threshold_lo < 1 || hot_threshold_hi < hot_threshold_lo)
    throw InvalidParameter("tri heuristic needs 1 <= lo <= hi thresholds");
}

TriHeuristicPolicy::TriHeuristicPolicy(TriHeuristicConfig cfg) : cfg_(cfg) { cfg_.validate(); }

PolicyDecision TriHeuristicPolicy::decide(const RequestContext& ctx) {
  if (ctx.storage.device_count() != 3)
    throw InvalidParameter("tri_heuristic needs three devices");
  const auto count = access_count_of(ctx.storage, ctx.request().page_id);
  if (count >= cfg_.hot_threshold_hi) return {0, "hot"};
  if (count >= cfg_.hot_threshold_lo) return {1, "cold"};
  return {2, "frozen"};
}

double fastest_latency_us(const DeviceSpec& spec, std::uint64_t page_size) {
  return std::min(device_service_us(spec, Op::Read, page_size),
                  device_service_us(spec, Op::Write, page_size));
}

namespace {

AgentConfig checked(AgentConfig cfg, const HybridStorage& storage) {
  if (static_cast<std::size_t>(cfg.action_count) != storage.device_count())
    throw InvalidParameter("sibyl needs one action per device: " +
                           std::to_string(cfg.action_count) + " actions, " +
                           std::to_string(storage.device_count()) + " devices");
  return cfg;
}

}  // namespace

SibylPolicy::SibylPolicy(AgentConfig cfg, const HybridStorage& storage, BinningConfig binning)
    : binning_(binning),
      agent_(checked(cfg, storage),
             default_support(cfg, fastest_latency_us(storage.device(0).spec, storage.page_size())),
             5 + storage.device_count() - 1) {}

PolicyDecision SibylPolicy::decide(const RequestContext& ctx) {
  if (cached_index_ == ctx.index)
    obs_ = cached_obs_;
  else
    obs_ = extract(ctx.request(), ctx.storage, binning_, ctx.index);
  action_ = agent_.act(obs_);
  return {static_cast<std::size_t>(action_), "agent"};
}

void SibylPolicy::after_request(const RequestContext& ctx, HybridStorage& storage,
                                ServiceOutcome& outcome) {
  const std::size_t next = ctx.index + 1;
  if (next >= ctx.workload.size()) {
    agent_.finish();
    return;
  }
  cached_obs_ = extract(ctx.workload[next], storage, binning_, next);
  cached_index_ = next;
  agent_.record({obs_, action_, reward(outcome, agent_.config().penalty_coeff), cached_obs_});
}

}  // namespace sibyl
