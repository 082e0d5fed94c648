#include "sibyl/agent.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "binio.hpp"
#include "sibyl/errors.hpp"

namespace sibyl {

using detail::get_le;
using detail::put_le;

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidParameter("gamma must be in [0, 1]");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidParameter("epsilon must be in [0, 1]");
  if (!(alpha > 0.0)) throw InvalidParameter("learning rate must be positive");
  if (buffer_capacity == 0) throw InvalidParameter("buffer capacity must be positive");
  if (batch_size == 0 || batch_size > buffer_capacity)
    throw InvalidParameter("batch size must be in [1, buffer capacity]");
  if (batches_per_step == 0) throw InvalidParameter("batches per step must be positive");
  if (sync_period == 0) throw InvalidParameter("sync period must be positive");
  if (action_count < 1 || action_count > 15)
    throw InvalidParameter("action count must fit the 4-bit action encoding");
  if (atoms < 2) throw InvalidParameter("need at least 2 atoms");
  if (penalty_coeff < 0) throw InvalidParameter("eviction penalty must be non-negative");
}

AtomSupport default_support(const AgentConfig& cfg, double fastest_latency_us) {
  if (!(fastest_latency_us > 0)) throw NonPositiveLatency("fastest latency must be positive");
  const double r_max = 1000.0 / fastest_latency_us;
  // An undiscounted return is unbounded; cap it at one sync period of best rewards.
  const double horizon =
      cfg.gamma < 1.0 ? std::min(1.0 / (1.0 - cfg.gamma), static_cast<double>(cfg.sync_period))
                      : static_cast<double>(cfg.sync_period);
  const double v_min = cfg.v_min.value_or(0.0);
  const double v_max = cfg.v_max.value_or(std::ceil(r_max * horizon));
  return AtomSupport(v_min, v_max, cfg.atoms);
}

double train_step(nn::Network& training, const nn::Network& inference,
                  const ExperienceBuffer& buffer, const AgentConfig& cfg,
                  const AtomSupport& support, std::mt19937_64& rng) {
  if (!buffer.filled())
    throw BufferNotFull("training needs a full experience buffer (" +
                        std::to_string(buffer.size()) + "/" +
                        std::to_string(buffer.capacity()) + ")");
  const auto k = static_cast<std::size_t>(support.k);
  const int actions = cfg.action_count;
  if (training.output_dim() != k * static_cast<std::size_t>(actions))
    throw DimensionMismatch("training network output does not match actions x atoms");

  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  nn::ForwardCache cache;
  nn::Gradients grads = training.make_gradients();
  std::vector<double> grad_out(training.output_dim(), 0.0);
  std::vector<double> next_probs(k);
  std::vector<double> pred(k);
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

  double last_loss = 0.0;
  for (std::size_t b = 0; b < cfg.batches_per_step; ++b) {
    grads.zero();
    double loss = 0.0;
    for (std::size_t s = 0; s < cfg.batch_size; ++s) {
      const Experience& e = buffer[pick(rng)];
      const auto x_next = normalized(e.next_obs);
      const auto next_logits =
          inference.forward(std::span(x_next).first(e.next_obs.feature_count()));
      const auto best = static_cast<std::size_t>(greedy_action(next_logits, support, actions));
      softmax(std::span(next_logits).subspan(best * k, k), next_probs);
      const auto target = project(next_probs, e.reward, cfg.gamma, support);

      const auto x = normalized(e.obs);
      training.forward(std::span(x).first(e.obs.feature_count()), cache);
      const auto a = static_cast<std::size_t>(e.action);
      const auto logits = cache.output().subspan(a * k, k);
      softmax(logits, pred);
      const double top = *std::max_element(logits.begin(), logits.end());
      double lse = 0.0;
      for (double z : logits) lse += std::exp(z - top);
      lse = top + std::log(lse);

      std::fill(grad_out.begin(), grad_out.end(), 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        loss -= target[i] * (logits[i] - lse);
        grad_out[a * k + i] = (pred[i] - target[i]) * inv_batch;
      }
      training.backward(cache, grad_out, grads);
    }
    training.sgd_step(grads, cfg.alpha);
    last_loss = loss * inv_batch;
  }
  return last_loss;
}

Agent::Agent(AgentConfig cfg, AtomSupport support, std::size_t input_dim)
    : cfg_(std::move(cfg)),
      support_(std::move(support)),
      training_(
          [&] {
            std::vector<std::size_t> dims{input_dim};
            dims.insert(dims.end(), cfg_.hidden.begin(), cfg_.hidden.end());
            dims.push_back(static_cast<std::size_t>(cfg_.action_count * support_.k));
            return dims;
          }(),
          cfg_.seed),
      inference_(training_),
      buffer_(cfg_.buffer_capacity),
      act_rng_(cfg_.seed ^ 0x5eedac7ull),
      train_rng_(cfg_.seed ^ 0x7a1eb0bull) {
  cfg_.validate();
  if (support_.k != cfg_.atoms) throw InvalidParameter("support atom count differs from config");
}

Agent::~Agent() {
  if (pending_.valid()) pending_.wait();
}

int Agent::act(const Observation& obs) {
  const auto x = normalized(obs);
  return select_action(inference_, std::span(x).first(obs.feature_count()), cfg_.epsilon,
                       support_, cfg_.action_count, act_rng_);
}

std::vector<double> Agent::q_values(const Observation& obs) const {
  const auto x = normalized(obs);
  return action_values(inference_.forward(std::span(x).first(obs.feature_count())), support_,
                       cfg_.action_count);
}

bool Agent::record(const Experience& e) {
  if (e.action < 0 || e.action >= cfg_.action_count)
    throw InvalidParameter("experience action out of range");
  buffer_.push(e);
  ++recorded_;
  if (cfg_.learn && buffer_.filled() && recorded_ % cfg_.sync_period == 0) {
    train_and_sync();
    return true;
  }
  return false;
}

void Agent::train_and_sync() {
  ++train_events_;
  if (!cfg_.concurrent) {
    losses_.push_back(train_step(training_, inference_, buffer_, cfg_, support_, train_rng_));
    nn::copy_weights(training_, inference_);
    return;
  }
  // Two lanes: the previous pass is joined and published here, then the next
  // pass starts on a snapshot while decisions keep using inference_. The
  // target network for the new pass is a private copy of inference_.
  finish();
  auto snapshot = std::make_shared<ExperienceBuffer>(buffer_);
  auto target = std::make_shared<nn::Network>(inference_);
  pending_ = std::async(std::launch::async, [this, snapshot, target] {
    return train_step(training_, *target, *snapshot, cfg_, support_, train_rng_);
  });
}

void Agent::finish() {
  if (!pending_.valid()) return;
  losses_.push_back(pending_.get());
  nn::copy_weights(training_, inference_);
}

namespace {

constexpr std::uint32_t kAgentMagic = 0x47414253;  // "SBAG"

void put_obs(std::ostream& out, const Observation& o) {
  put_le(out, static_cast<std::uint64_t>(o.device_count), 1);
  put_le(out, pack_state(o), 8);
}

Observation get_obs(std::istream& in) {
  const int n = static_cast<int>(get_le(in, 1));
  return unpack_state(get_le(in, 8), n);
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_from_text(std::mt19937_64& rng, const std::string& text) {
  std::istringstream is(text);
  is >> rng;
  if (!is) throw std::runtime_error("corrupt RNG state in checkpoint");
}

}  // namespace

void Agent::save(std::ostream& out) {
  finish();
  put_le(out, kAgentMagic, 4);
  nn::save_checkpoint(out, training_);
  nn::save_checkpoint(out, inference_);
  put_le(out, recorded_, 8);
  put_le(out, train_events_, 8);
  put_le(out, losses_.size(), 8);
  for (double l : losses_) put_le(out, std::bit_cast<std::uint64_t>(l), 8);
  put_le(out, buffer_.capacity(), 8);
  put_le(out, buffer_.write_cursor(), 8);
  put_le(out, buffer_.size(), 8);
  for (const auto& e : buffer_.items()) {
    put_obs(out, e.obs);
    put_le(out, static_cast<std::uint64_t>(e.action), 1);
    put_le(out, std::bit_cast<std::uint64_t>(e.reward), 8);
    put_obs(out, e.next_obs);
  }
  detail::put_string(out, rng_text(act_rng_));
  detail::put_string(out, rng_text(train_rng_));
}

void Agent::load(std::istream& in) {
  finish();
  if (get_le(in, 4) != kAgentMagic) throw std::runtime_error("not an agent checkpoint");
  auto training = nn::load_checkpoint(in);
  auto inference = nn::load_checkpoint(in);
  nn::copy_weights(training, training_);
  nn::copy_weights(inference, inference_);
  recorded_ = get_le(in, 8);
  train_events_ = get_le(in, 8);
  losses_.resize(get_le(in, 8));
  for (double& l : losses_) l = std::bit_cast<double>(get_le(in, 8));
  if (get_le(in, 8) != buffer_.capacity())
    throw std::runtime_error("checkpoint buffer capacity differs from config");
  const auto cursor = get_le(in, 8);
  std::vector<Experience> items(get_le(in, 8));
  for (auto& e : items) {
    e.obs = get_obs(in);
    e.action = static_cast<int>(get_le(in, 1));
    e.reward = std::bit_cast<double>(get_le(in, 8));
    e.next_obs = get_obs(in);
  }
  buffer_.restore(std::move(items), cursor);
  rng_from_text(act_rng_, detail::get_string(in));
  rng_from_text(train_rng_, detail::get_string(in));
}

}  // namespace sibyl
