#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace sibyl::nn {

enum class Activation { Swish, Identity };

double sigmoid(double z);
/// z * sigmoid(z)
double swish(double z);
/// sigmoid(z) + z * sigmoid(z) * (1 - sigmoid(z))
double swish_grad(double z);

/// Fully connected layer, weights stored out x in row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> biases;
  Activation activation = Activation::Identity;

  double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
};

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  void zero();
  void scale(double factor);
};

/// Activations kept from a forward pass. inputs[l] is the input of layer l,
/// pre[l] its pre-activation; inputs.back() is the network output.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;

  std::span<const double> output() const { return inputs.back(); }
};

/// Feed-forward net: swish on every hidden layer, identity on the output.
class Network {
 public:
  /// dims = {input, hidden..., output}. Weights and biases are drawn
  /// uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Network(std::vector<std::size_t> dims, std::uint64_t seed);

  /// Same topology with every parameter zero.
  static Network zeros(std::vector<std::size_t> dims);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<double> forward(std::span<const double> x) const;
  void forward(std::span<const double> x, ForwardCache& cache) const;

  Gradients make_gradients() const;

  /// Adds d(loss)/d(parameters) to `accum`, where grad_out is d(loss)/d(output)
  /// for the forward pass captured in `cache`.
  void backward(const ForwardCache& cache, std::span<const double> grad_out,
                Gradients& accum) const;
  Gradients backward(std::span<const double> x, std::span<const double> grad_out) const;

  /// p <- p - alpha * g for every weight and bias.
  void sgd_step(const Gradients& grads, double alpha);

 private:
  Network() = default;
  void build(std::vector<std::size_t> dims);

  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

/// dst parameters become bitwise equal to src. Throws TopologyMismatch.
void copy_weights(const Network& src, Network& dst);

/// Weights only, biases excluded.
std::size_t weight_count(std::span<const std::size_t> dims);
std::size_t weight_count(const Network& net);
std::size_t param_count(const Network& net);
/// Multiply-accumulates for one forward pass (one per weight).
std::size_t mac_count(const Network& net);

std::uint16_t to_half(double v);
double from_half(std::uint16_t h);

enum class Precision : std::uint16_t { Double = 8, Half = 2 };

/// Checkpoint layout: magic "TNNC", u16 version, u16 bytes per value,
/// u32 dim count, u32 dims, then every layer's weights (row-major), then
/// every layer's biases. All little-endian.
struct CheckpointLayout {
  std::size_t header_bytes = 0;
  std::size_t weight_bytes = 0;
  std::size_t bias_bytes = 0;
  std::size_t total() const { return header_bytes + weight_bytes + bias_bytes; }
};

CheckpointLayout checkpoint_layout(std::span<const std::size_t> dims, Precision precision);
void save_checkpoint(std::ostream& out, const Network& net,
                     Precision precision = Precision::Double);
Network load_checkpoint(std::istream& in);

}  // namespace sibyl::nn
