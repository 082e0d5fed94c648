#pragma once

#include <cstddef>
#include <cstdint>
#include <future>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "sibyl/c51.hpp"
#include "sibyl/tinynn.hpp"

namespace sibyl {

struct AgentConfig {
  double gamma = 0.9;
  double alpha = 1e-4;
  double epsilon = 0.001;
  std::size_t batch_size = 128;
  std::size_t batches_per_step = 8;
  std::size_t buffer_capacity = 1000;
  std::size_t sync_period = 1000;
  double penalty_coeff = kEvictionPenaltyCoeff;
  int action_count = 2;
  int atoms = 51;
  std::optional<double> v_min;
  std::optional<double> v_max;
  std::vector<std::size_t> hidden{20, 30};
  std::uint64_t seed = 1;
  bool learn = true;
  /// Runs training on a separate lane, joined at the next sync point.
  bool concurrent = false;

  /// Throws InvalidParameter.
  void validate() const;
};

/// Support [v_min, v_max] with k = cfg.atoms. Unless configured, v_min = 0
/// and v_max is the discounted return of always earning the best reward,
/// ceil(r_max / (1 - gamma)), where r_max = 1 / fastest_latency_ms. The
/// horizon 1 / (1 - gamma) is capped at sync_period.
AtomSupport default_support(const AgentConfig& cfg, double fastest_latency_us);

/// One C51 update pass: cfg.batches_per_step batches of cfg.batch_size
/// experiences sampled uniformly with replacement. Targets come from the
/// inference network's greedy next-state distribution; the loss is the mean
/// cross-entropy of the taken action, and SGD runs after every batch.
/// Returns the last batch's mean loss. Throws BufferNotFull.
double train_step(nn::Network& training, const nn::Network& inference,
                  const ExperienceBuffer& buffer, const AgentConfig& cfg,
                  const AtomSupport& support, std::mt19937_64& rng);

/// The learning agent: decisions come from the inference network, updates
/// go to the training network, which is copied over after every training
/// pass. Training first runs once the buffer is full and then every
/// sync_period recorded experiences.
class Agent {
 public:
  Agent(AgentConfig cfg, AtomSupport support, std::size_t input_dim);
  ~Agent();
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  int act(const Observation& obs);
  std::vector<double> q_values(const Observation& obs) const;

  /// Stores the transition; returns true if a training pass and weight sync
  /// were triggered by it.
  bool record(const Experience& e);

  /// Joins any in-flight concurrent training and syncs its weights.
  void finish();

  const AgentConfig& config() const { return cfg_; }
  const AtomSupport& support() const { return support_; }
  const nn::Network& training_net() const { return training_; }
  const nn::Network& inference_net() const { return inference_; }
  nn::Network& training_net() { return training_; }
  nn::Network& inference_net() { return inference_; }
  const ExperienceBuffer& buffer() const { return buffer_; }
  std::size_t recorded() const { return recorded_; }
  std::size_t train_events() const { return train_events_; }
  const std::vector<double>& losses() const { return losses_; }

  /// Both networks, the buffer, both RNG streams and the counters.
  void save(std::ostream& out);
  void load(std::istream& in);

 private:
  void train_and_sync();

  AgentConfig cfg_;
  AtomSupport support_;
  nn::Network training_;
  nn::Network inference_;
  ExperienceBuffer buffer_;
  std::mt19937_64 act_rng_;
  std::mt19937_64 train_rng_;
  std::size_t recorded_ = 0;
  std::size_t train_events_ = 0;
  std::vector<double> losses_;
  std::future<double> pending_;
};

}  // namespace sibyl
