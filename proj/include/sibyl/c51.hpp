#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sibyl/features.hpp"
#include "sibyl/hss.hpp"
#include "sibyl/tinynn.hpp"

namespace sibyl {

/// Fixed categorical support z_i = v_min + i * delta, i in [0, k).
struct AtomSupport {
  double v_min = 0.0;
  double v_max = 1.0;
  int k = 51;
  double delta = 0.0;
  std::vector<double> atoms;

  AtomSupport() = default;
  AtomSupport(double v_min, double v_max, int k);
};

inline constexpr double kEvictionPenaltyCoeff = 0.001;

/// Placement reward with latencies in milliseconds:
/// 1 / L_t without eviction, max(0, 1 / L_t - coeff * L_e) with one.
double reward(const ServiceOutcome& outcome, double penalty_coeff = kEvictionPenaltyCoeff);

void softmax(std::span<const double> logits, std::span<double> out);

/// Expected value of each action's categorical distribution. `logits` holds
/// actions x k entries, action-major.
std::vector<double> action_values(std::span<const double> logits, const AtomSupport& support,
                                  int actions);

/// Argmax of action_values; ties go to the lowest action index.
int greedy_action(std::span<const double> logits, const AtomSupport& support, int actions);

/// Epsilon-greedy choice on `net` (normally the inference network).
int select_action(const nn::Network& net, std::span<const double> features, double epsilon,
                  const AtomSupport& support, int actions, std::mt19937_64& rng);

/// Categorical projection of the distribution `probs` shifted to
/// r + gamma * z_j (clamped to the support) back onto the atoms.
std::vector<double> project(std::span<const double> probs, double r, double gamma,
                            const AtomSupport& support);

struct Experience {
  Observation obs;
  int action = 0;
  double reward = 0.0;
  Observation next_obs;

  bool operator==(const Experience&) const = default;
};

/// state + 4-bit action + 16-bit half-precision reward + next state.
std::size_t packed_experience_bits(int device_count);
std::vector<std::uint8_t> pack_experience(const Experience& e);
Experience unpack_experience(std::span<const std::uint8_t> bytes, int device_count);

/// Fixed-capacity ring; once full, each push overwrites the oldest entry.
class ExperienceBuffer {
 public:
  explicit ExperienceBuffer(std::size_t capacity = 1000);

  void push(const Experience& e);
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool filled() const { return items_.size() == capacity_; }
  std::size_t write_cursor() const { return cursor_; }
  const Experience& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<Experience>& items() const { return items_; }

  void restore(std::vector<Experience> items, std::size_t cursor);

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Experience> items_;
};

}  // namespace sibyl
