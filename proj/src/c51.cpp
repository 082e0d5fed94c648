#include "sibyl/c51.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sibyl/errors.hpp"

namespace sibyl {

AtomSupport::AtomSupport(double v_min_, double v_max_, int k_)
    : v_min(v_min_), v_max(v_max_), k(k_) {
  if (!(v_min < v_max)) throw InvalidParameter("atom support needs v_min < v_max");
  if (k < 2) throw InvalidParameter("atom support needs at least 2 atoms");
  delta = (v_max - v_min) / (k - 1);
  atoms.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) atoms[static_cast<std::size_t>(i)] = v_min + i * delta;
  atoms.back() = v_max;
}

double reward(const ServiceOutcome& outcome, double penalty_coeff) {
  if (!(outcome.latency_us > 0))
    throw NonPositiveLatency("request latency must be positive");
  const double inv = 1.0 / (outcome.latency_us / 1000.0);
  if (!outcome.eviction_occurred) return inv;
  return std::max(0.0, inv - penalty_coeff * (outcome.eviction_latency_us / 1000.0));
}

void softmax(std::span<const double> logits, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

std::vector<double> action_values(std::span<const double> logits, const AtomSupport& support,
                                  int actions) {
  const auto k = static_cast<std::size_t>(support.k);
  if (logits.size() != k * static_cast<std::size_t>(actions))
    throw DimensionMismatch("logits do not match actions x atoms");
  std::vector<double> q(static_cast<std::size_t>(actions));
  std::vector<double> p(k);
  for (std::size_t a = 0; a < q.size(); ++a) {
    softmax(logits.subspan(a * k, k), p);
    double v = 0.0;
    for (std::size_t i = 0; i < k; ++i) v += p[i] * support.atoms[i];
    q[a] = v;
  }
  return q;
}

int greedy_action(std::span<const double> logits, const AtomSupport& support, int actions) {
  auto q = action_values(logits, support, actions);
  int best = 0;
  for (int a = 1; a < actions; ++a)
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  return best;
}

int select_action(const nn::Network& net, std::span<const double> features, double epsilon,
                  const AtomSupport& support, int actions, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) return std::uniform_int_distribution<int>(0, actions - 1)(rng);
  return greedy_action(net.forward(features), support, actions);
}

std::vector<double> project(std::span<const double> probs, double r, double gamma,
                            const AtomSupport& support) {
  const auto k = static_cast<std::size_t>(support.k);
  if (probs.size() != k) throw DimensionMismatch("distribution does not match the support");
  std::vector<double> m(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const double tz = std::clamp(r + gamma * support.atoms[j], support.v_min, support.v_max);
    const double b = (tz - support.v_min) / support.delta;
    auto lo = static_cast<std::size_t>(std::floor(b));
    auto hi = static_cast<std::size_t>(std::ceil(b));
    lo = std::min(lo, k - 1);
    hi = std::min(hi, k - 1);
    if (lo == hi) {
      m[lo] += probs[j];
    } else {
      m[lo] += probs[j] * (static_cast<double>(hi) - b);
      m[hi] += probs[j] * (b - static_cast<double>(lo));
    }
  }
  return m;
}

std::size_t packed_experience_bits(int device_count) {
  return 2 * packed_state_bits(device_count) + 4 + 16;
}

namespace {

class BitWriter {
 public:
  explicit BitWriter(std::size_t bits) : bytes_((bits + 7) / 8, 0) {}
  void put(std::uint64_t v, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i, ++pos_)
      if ((v >> i) & 1u) bytes_[pos_ / 8] |= static_cast<std::uint8_t>(1u << (pos_ % 8));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint64_t get(std::size_t width) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i, ++pos_)
      if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1u) v |= std::uint64_t{1} << i;
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> pack_experience(const Experience& e) {
  const int n = e.obs.device_count;
  const std::size_t state_bits = packed_state_bits(n);
  BitWriter w(packed_experience_bits(n));
  w.put(pack_state(e.obs), state_bits);
  w.put(static_cast<std::uint64_t>(e.action), 4);
  w.put(nn::to_half(e.reward), 16);
  w.put(pack_state(e.next_obs), state_bits);
  return w.take();
}

Experience unpack_experience(std::span<const std::uint8_t> bytes, int device_count) {
  const std::size_t state_bits = packed_state_bits(device_count);
  if (bytes.size() * 8 < packed_experience_bits(device_count))
    throw DimensionMismatch("packed experience too short");
  BitReader r(bytes);
  Experience e;
  e.obs = unpack_state(r.get(state_bits), device_count);
  e.action = static_cast<int>(r.get(4));
  e.reward = nn::from_half(static_cast<std::uint16_t>(r.get(16)));
  e.next_obs = unpack_state(r.get(state_bits), device_count);
  return e;
}

ExperienceBuffer::ExperienceBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InvalidParameter("experience buffer capacity must be positive");
  items_.reserve(capacity_);
}

void ExperienceBuffer::push(const Experience& e) {
  if (items_.size() < capacity_)
    items_.push_back(e);
  else
    items_[cursor_] = e;
  cursor_ = (cursor_ + 1) % capacity_;
}

void ExperienceBuffer::restore(std::vector<Experience> items, std::size_t cursor) {
  if (items.size() > capacity_ || cursor >= capacity_)
    throw InvalidParameter("experience buffer dump does not fit the capacity");
  items_ = std::move(items);
  cursor_ = cursor;
}

}  // namespace sibyl
