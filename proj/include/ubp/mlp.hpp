#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ubp/rng.hpp"

namespace ubp {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Layer sizes: t latent inputs, any number of hidden layers, d' outputs.
struct Topology {
  std::size_t inputs = 1;
  std::vector<std::size_t> hidden;
  std::size_t outputs = 1;

  std::size_t weight_layers() const { return hidden.size() + 1; }
  std::size_t layer_size(std::size_t k) const {  // k = 0 .. weight_layers()
    if (k == 0) return inputs;
    if (k <= hidden.size()) return hidden[k - 1];
    return outputs;
  }
  void validate() const {
    if (inputs < 1 || outputs < 1) throw std::invalid_argument("topology needs inputs >= 1 and outputs >= 1");
    for (auto h : hidden)
      if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
  }
  bool operator==(const Topology&) const = default;
};

// Weight-shaped gradient, one matrix + bias vector per weight layer.
struct WeightGradient {
  std::vector<std::vector<double>> w;  // [layer][in*out], row-major in -> out
  std::vector<std::vector<double>> b;  // [layer][out]
};

// Feed-forward net with logistic activations on every layer, including the
// output. Holds its own forward/error scratch state, so one instance is a
// single training sequence: forward -> backprop_deltas -> update. Distinct
// instances may train on different threads.
//
// Two gradients come out of one backprop pass: the usual weight gradient
// g_{i,j} = -delta_j * alpha_i, and the input gradient h used to refine the
// latent vector that was fed in. With no hidden layer only the weight into
// the presented output c participates (h_i = -w_{i,c} delta_c); with hidden
// layers h_i sums over the first hidden layer (h_i = -sum_j w_{i,j} delta_j).
class MlpModel {
 public:
  explicit MlpModel(Topology topo);

  // All weights and biases i.i.d. Normal(0, 0.01); deterministic per rng state.
  static MlpModel random_init(Topology topo, Rng& rng);

  const Topology& topology() const { return topo_; }
  std::size_t inputs() const { return topo_.inputs; }
  std::size_t outputs() const { return topo_.outputs; }
  std::size_t hidden_layers() const { return topo_.hidden.size(); }

  // Full forward pass; returns the output activations.
  const std::vector<double>& forward(std::span<const double> v);

  // Hidden layers fully computed, but only output unit c; returns alpha_c.
  double forward_single_output(std::span<const double> v, std::size_t c);

  // delta_c = (target - alpha_c) f'(beta_c); other output deltas are 0;
  // hidden deltas by backward recursion. Requires a prior forward for the
  // same presented v.
  void backprop_deltas(std::size_t c, double target);

  WeightGradient weight_gradient() const;

  std::vector<double> input_gradient() const;
  void input_gradient_into(std::span<double> h) const;
  // Always takes the summation path over the next layer, even when there is
  // no hidden layer; used to check that the general form reduces to the
  // single-weight form bit-for-bit.
  void input_gradient_via_sum(std::span<double> h) const;

  // W <- W - eta * (g + lambda * W), biases included with alpha_i = 1.
  // With lambda == 0 only weights on the active path change.
  void sgd_step(std::size_t c, double eta, double lambda);

  // Stateless full forward for concurrent evaluation.
  struct Workspace {
    std::vector<std::vector<double>> act;
  };
  Workspace make_workspace() const;
  void predict(std::span<const double> v, std::span<double> out, Workspace& ws) const;
  std::vector<double> predict(std::span<const double> v) const;

  const std::vector<std::vector<double>>& weights() const { return w_; }
  const std::vector<std::vector<double>>& biases() const { return b_; }
  std::vector<std::vector<double>>& weights() { return w_; }
  std::vector<std::vector<double>>& biases() { return b_; }
  const std::vector<double>& output_activations() const { return act_.back(); }
  const std::vector<std::vector<double>>& deltas() const { return delta_; }

  nlohmann::json to_json() const;
  static MlpModel from_json(const nlohmann::json& j);

  bool operator==(const MlpModel& other) const {
    return topo_ == other.topo_ && w_ == other.w_ && b_ == other.b_;
  }

 private:
  void propagate_hidden(std::span<const double> v);

  Topology topo_;
  std::vector<std::vector<double>> w_;  // [layer][in*out]
  std::vector<std::vector<double>> b_;  // [layer][out]

  // scratch: act_[0] is the presented input, act_[k]/net_[k-1] per layer
  std::vector<std::vector<double>> act_;
  std::vector<std::vector<double>> net_;    // [layer][out]
  std::vector<std::vector<double>> delta_;  // [layer][out]
  bool forward_valid_ = false;
  bool deltas_valid_ = false;
  bool full_forward_ = false;
  std::size_t presented_ = 0;
};

}  // namespace ubp
