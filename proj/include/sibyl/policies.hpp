#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sibyl/agent.hpp"
#include "sibyl/features.hpp"
#include "sibyl/hss.hpp"
#include "sibyl/trace.hpp"

namespace sibyl {

struct PolicyDecision {
  std::size_t target_device = 0;
  std::string_view rationale_tag;
};

/// What a policy may look at when deciding request `index`. `future` is set
/// only for policies that ask for it.
struct RequestContext {
  const Workload& workload;
  std::size_t index;
  const HybridStorage& storage;
  const FutureIndex* future = nullptr;

  const TraceRecord& request() const { return workload[index]; }
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string_view name() const = 0;
  virtual PolicyDecision decide(const RequestContext& ctx) = 0;
  /// Runs after the placement was applied. May move data (epoch demotion)
  /// and fold that work into `outcome`.
  virtual void after_request(const RequestContext&, HybridStorage&, ServiceOutcome&) {}
  virtual VictimPolicy victims() const { return VictimPolicy::LRU; }
  virtual bool needs_future() const { return false; }
};

class FastOnlyPolicy final : public Policy {
 public:
  std::string_view name() const override { return "fast_only"; }
  PolicyDecision decide(const RequestContext&) override { return {0, "fast_only"}; }
};

class SlowOnlyPolicy final : public Policy {
 public:
  std::string_view name() const override { return "slow_only"; }
  PolicyDecision decide(const RequestContext& ctx) override {
    return {ctx.storage.slowest(), "slow_only"};
  }
};

/// Placement with future knowledge and Belady victims. The base rule is
/// greedy: pages already in fast stay there; a request goes to fast when its
/// first page is used again and either fits without eviction or is needed
/// sooner than the fast page with the furthest next use. Data that is never
/// used again goes to the slowest device. Any other request that would bring
/// data into fast is settled by simulating both choices over the next
/// `horizon` requests, continuing with either the base rule or by keeping new
/// data out of fast, and taking the cheaper one.
/// A horizon of 0 keeps the pure greedy rule.
class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(std::size_t horizon = 16);
  std::string_view name() const override { return "oracle"; }
  PolicyDecision decide(const RequestContext& ctx) override;
  VictimPolicy victims() const override { return VictimPolicy::Belady; }
  bool needs_future() const override { return true; }

 private:
  std::size_t horizon_;
  std::optional<HybridStorage> scratch_;
};

struct CdeConfig {
  std::uint64_t random_size_threshold_pages = 8;
  std::uint64_t hot_threshold = 2;

  void validate() const;
};

/// Writes go to fast when hot (access count) or random (small); otherwise to
/// slow. Reads stay where the data is; unseen data is read from slow.
class CdePolicy final : public Policy {
 public:
  explicit CdePolicy(CdeConfig cfg = {});
  std::string_view name() const override { return "cde"; }
  PolicyDecision decide(const RequestContext& ctx) override;

 private:
  CdeConfig cfg_;
};

struct HpsConfig {
  std::uint64_t epoch_requests = 1000;
  std::uint64_t hot_threshold = 2;

  void validate() const;
};

/// Demotes every fast page accessed fewer than hot_threshold times in the
/// ending epoch to the next slower device, then clears all epoch counters.
std::vector<MigrationEvent> hps_epoch_migrate(HybridStorage& storage, const HpsConfig& cfg);

/// New data is written to fast; existing data is never promoted and cold
/// pages are demoted at epoch boundaries.
class HpsPolicy final : public Policy {
 public:
  explicit HpsPolicy(HpsConfig cfg = {});
  std::string_view name() const override { return "hps"; }
  PolicyDecision decide(const RequestContext& ctx) override;
  void after_request(const RequestContext& ctx, HybridStorage& storage,
                     ServiceOutcome& outcome) override;

 private:
  HpsConfig cfg_;
};

struct TriHeuristicConfig {
  std::uint64_t hot_threshold_hi = 4;
  std::uint64_t hot_threshold_lo = 2;

  void validate() const;
};

/// Hot data to H, cold to M, frozen to L by the first page's access count.
class TriHeuristicPolicy final : public Policy {
 public:
  explicit TriHeuristicPolicy(TriHeuristicConfig cfg = {});
  std::string_view name() const override { return "tri_heuristic"; }
  PolicyDecision decide(const RequestContext& ctx) override;

 private:
  TriHeuristicConfig cfg_;
};

/// The RL placement policy: action a places the request on device a. The
/// experience for request t is completed after placement, with the
/// observation of request t + 1 taken on the updated system state; that
/// observation is reused when request t + 1 is decided.
class SibylPolicy final : public Policy {
 public:
  SibylPolicy(AgentConfig cfg, const HybridStorage& storage, BinningConfig binning = {});
  std::string_view name() const override { return "sibyl"; }
  PolicyDecision decide(const RequestContext& ctx) override;
  void after_request(const RequestContext& ctx, HybridStorage& storage,
                     ServiceOutcome& outcome) override;

  Agent& agent() { return agent_; }
  const Agent& agent() const { return agent_; }

 private:
  BinningConfig binning_;
  Agent agent_;
  Observation obs_;
  int action_ = 0;
  std::optional<std::size_t> cached_index_;
  Observation cached_obs_;
};

/// Fastest possible request latency of a device: reading one page.
double fastest_latency_us(const DeviceSpec& spec, std::uint64_t page_size);

}  // namespace sibyl
