#include "sibyl/tinynn.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "binio.hpp"
#include "sibyl/errors.hpp"

namespace sibyl::nn {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double swish(double z) { return z * sigmoid(z); }

double swish_grad(double z) {
  const double s = sigmoid(z);
  return s + z * s * (1.0 - s);
}

void Gradients::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void Gradients::scale(double factor) {
  for (auto& w : weights)
    for (auto& v : w) v *= factor;
  for (auto& b : biases)
    for (auto& v : b) v *= factor;
}

void Network::build(std::vector<std::size_t> dims) {
  if (dims.size() < 2) throw DimensionMismatch("a network needs input and output dims");
  for (auto d : dims)
    if (d == 0) throw DimensionMismatch("layer dimensions must be positive");
  dims_ = std::move(dims);
  layers_.clear();
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    DenseLayer layer;
    layer.in = dims_[l];
    layer.out = dims_[l + 1];
    layer.weights.assign(layer.in * layer.out, 0.0);
    layer.biases.assign(layer.out, 0.0);
    layer.activation = l + 2 == dims_.size() ? Activation::Identity : Activation::Swish;
    layers_.push_back(std::move(layer));
  }
}

Network::Network(std::vector<std::size_t> dims, std::uint64_t seed) {
  build(std::move(dims));
  std::mt19937_64 rng(seed);
  for (auto& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : layer.weights) w = u(rng);
    for (auto& b : layer.biases) b = u(rng);
  }
}

Network Network::zeros(std::vector<std::size_t> dims) {
  Network net;
  net.build(std::move(dims));
  return net;
}

void Network::forward(std::span<const double> x, ForwardCache& cache) const {
  if (x.size() != input_dim())
    throw DimensionMismatch("network expects " + std::to_string(input_dim()) +
                            " inputs, got " + std::to_string(x.size()));
  cache.inputs.resize(layers_.size() + 1);
  cache.pre.resize(layers_.size());
  cache.inputs[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const auto& in = cache.inputs[l];
    auto& z = cache.pre[l];
    auto& a = cache.inputs[l + 1];
    z.resize(layer.out);
    a.resize(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* row = &layer.weights[o * layer.in];
      double sum = layer.biases[o];
      for (std::size_t i = 0; i < layer.in; ++i) sum += row[i] * in[i];
      z[o] = sum;
      a[o] = layer.activation == Activation::Swish ? swish(sum) : sum;
    }
  }
}

std::vector<double> Network::forward(std::span<const double> x) const {
  ForwardCache cache;
  forward(x, cache);
  return std::move(cache.inputs.back());
}

Gradients Network::make_gradients() const {
  Gradients g;
  for (const auto& layer : layers_) {
    g.weights.emplace_back(layer.weights.size(), 0.0);
    g.biases.emplace_back(layer.biases.size(), 0.0);
  }
  return g;
}

void Network::backward(const ForwardCache& cache, std::span<const double> grad_out,
                       Gradients& accum) const {
  if (grad_out.size() != output_dim())
    throw DimensionMismatch("gradient has " + std::to_string(grad_out.size()) +
                            " entries, network has " + std::to_string(output_dim()) +
                            " outputs");
  if (cache.pre.size() != layers_.size())
    throw DimensionMismatch("forward cache does not match the network");

  std::vector<double> delta(grad_out.begin(), grad_out.end());
  std::vector<double> next;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    if (layer.activation == Activation::Swish)
      for (std::size_t o = 0; o < layer.out; ++o) delta[o] *= swish_grad(cache.pre[l][o]);

    const auto& in = cache.inputs[l];
    auto& gw = accum.weights[l];
    auto& gb = accum.biases[l];
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* row = &gw[o * layer.in];
      for (std::size_t i = 0; i < layer.in; ++i) row[i] += d * in[i];
      gb[o] += d;
    }
    if (l == 0) break;
    next.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = &layer.weights[o * layer.in];
      for (std::size_t i = 0; i < layer.in; ++i) next[i] += row[i] * d;
    }
    delta.swap(next);
  }
}

Gradients Network::backward(std::span<const double> x,
                             std::span<const double> grad_out) const {
  ForwardCache cache;
  forward(x, cache);
  Gradients g = make_gradients();
  backward(cache, grad_out, g);
  return g;
}

void Network::sgd_step(const Gradients& grads, double alpha) {
  if (grads.weights.size() != layers_.size())
    throw TopologyMismatch("gradients do not match the network");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    const auto& gw = grads.weights[l];
    const auto& gb = grads.biases[l];
    if (gw.size() != layer.weights.size() || gb.size() != layer.biases.size())
      throw TopologyMismatch("gradients do not match the network");
    for (std::size_t i = 0; i < gw.size(); ++i) layer.weights[i] -= alpha * gw[i];
    for (std::size_t i = 0; i < gb.size(); ++i) layer.biases[i] -= alpha * gb[i];
  }
}

void copy_weights(const Network& src, Network& dst) {
  if (src.dims() != dst.dims()) throw TopologyMismatch("networks differ in topology");
  for (std::size_t l = 0; l < src.layers().size(); ++l) {
    dst.layers()[l].weights = src.layers()[l].weights;
    dst.layers()[l].biases = src.layers()[l].biases;
  }
}

std::size_t weight_count(std::span<const std::size_t> dims) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1];
  return n;
}

std::size_t weight_count(const Network& net) { return weight_count(net.dims()); }

std::size_t param_count(const Network& net) {
  std::size_t n = weight_count(net);
  for (std::size_t l = 1; l < net.dims().size(); ++l) n += net.dims()[l];
  return n;
}

std::size_t mac_count(const Network& net) { return weight_count(net); }

std::uint16_t to_half(double v) {
  const auto x = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t raw_exp = (x >> 23) & 0xffu;
  std::uint32_t mant = x & 0x7fffffu;
  if (raw_exp == 0xffu) return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));

  const int exp = static_cast<int>(raw_exp) - 127 + 15;
  if (exp >= 31) return static_cast<std::uint16_t>(sign | 0x7c00u);
  if (exp <= 0) {
    if (exp < -10) return static_cast<std::uint16_t>(sign);
    mant |= 0x800000u;
    const int shift = 14 - exp;
    std::uint32_t half_mant = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (half_mant & 1u))) ++half_mant;
    return static_cast<std::uint16_t>(sign | half_mant);
  }
  std::uint32_t half = sign | (static_cast<std::uint32_t>(exp) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1fffu;
  // Round to nearest even; a carry into the exponent is the correct result.
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;
  return static_cast<std::uint16_t>(half);
}

double from_half(std::uint16_t h) {
  const double sign = (h & 0x8000u) ? -1.0 : 1.0;
  const int exp = (h >> 10) & 0x1f;
  const int mant = h & 0x3ff;
  if (exp == 0) return sign * std::ldexp(static_cast<double>(mant), -24);
  if (exp == 31) return mant ? std::nan("") : sign * INFINITY;
  return sign * std::ldexp(static_cast<double>(1024 + mant), exp - 25);
}

namespace {

using detail::get_le;
using detail::put_le;

constexpr char kMagic[4] = {'T', 'N', 'N', 'C'};
constexpr std::uint16_t kVersion = 1;

void put_value(std::ostream& out, double v, Precision p) {
  if (p == Precision::Double)
    put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  else
    put_le(out, to_half(v), 2);
}

double get_value(std::istream& in, Precision p) {
  if (p == Precision::Double) return std::bit_cast<double>(get_le(in, 8));
  return from_half(static_cast<std::uint16_t>(get_le(in, 2)));
}

}  // namespace

CheckpointLayout checkpoint_layout(std::span<const std::size_t> dims, Precision precision) {
  const auto width = static_cast<std::size_t>(precision);
  CheckpointLayout layout;
  layout.header_bytes = 4 + 2 + 2 + 4 + 4 * dims.size();
  layout.weight_bytes = weight_count(dims) * width;
  std::size_t biases = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) biases += dims[l];
  layout.bias_bytes = biases * width;
  return layout;
}

void save_checkpoint(std::ostream& out, const Network& net, Precision precision) {
  out.write(kMagic, 4);
  put_le(out, kVersion, 2);
  put_le(out, static_cast<std::uint16_t>(precision), 2);
  put_le(out, net.dims().size(), 4);
  for (auto d : net.dims()) put_le(out, d, 4);
  for (const auto& layer : net.layers())
    for (double w : layer.weights) put_value(out, w, precision);
  for (const auto& layer : net.layers())
    for (double b : layer.biases) put_value(out, b, precision);
}

Network load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic))
    throw std::runtime_error("not a network checkpoint");
  if (get_le(in, 2) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  const auto width = get_le(in, 2);
  if (width != 8 && width != 2) throw std::runtime_error("bad checkpoint precision");
  const auto precision = static_cast<Precision>(width);
  const auto n = get_le(in, 4);
  if (n < 2 || n > 64) throw std::runtime_error("bad checkpoint dims");
  std::vector<std::size_t> dims(n);
  for (auto& d : dims) d = get_le(in, 4);
  Network net = Network::zeros(dims);
  for (auto& layer : net.layers())
    for (double& w : layer.weights) w = get_value(in, precision);
  for (auto& layer : net.layers())
    for (double& b : layer.biases) b = get_value(in, precision);
  return net;
}

}  // namespace sibyl::nn
