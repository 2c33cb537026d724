#include "ubp/mlp.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace ubp {

MlpModel::MlpModel(Topology topo) : topo_(std::move(topo)) {
  topo_.validate();
  const std::size_t layers = topo_.weight_layers();
  w_.resize(layers);
  b_.resize(layers);
  net_.resize(layers);
  delta_.resize(layers);
  act_.resize(layers + 1);
  act_[0].resize(topo_.inputs, 0.0);
  for (std::size_t k = 0; k < layers; ++k) {
    const std::size_t in = topo_.layer_size(k);
    const std::size_t out = topo_.layer_size(k + 1);
    w_[k].assign(in * out, 0.0);
    b_[k].assign(out, 0.0);
    net_[k].assign(out, 0.0);
    delta_[k].assign(out, 0.0);
    act_[k + 1].assign(out, 0.0);
  }
}

MlpModel MlpModel::random_init(Topology topo, Rng& rng) {
  MlpModel m(std::move(topo));
  for (std::size_t k = 0; k < m.w_.size(); ++k) {
    for (auto& w : m.w_[k]) w = rng.normal(0.0, 0.01);
    for (auto& b : m.b_[k]) b = rng.normal(0.0, 0.01);
  }
  return m;
}

void MlpModel::propagate_hidden(std::span<const double> v) {
  if (v.size() != topo_.inputs) throw std::invalid_argument("input width does not match topology");
  std::copy(v.begin(), v.end(), act_[0].begin());
  for (std::size_t k = 0; k + 1 < topo_.weight_layers(); ++k) {
    const std::size_t in = topo_.layer_size(k);
    const std::size_t out = topo_.layer_size(k + 1);
    for (std::size_t j = 0; j < out; ++j) {
      double net = b_[k][j];
      for (std::size_t i = 0; i < in; ++i) net += w_[k][i * out + j] * act_[k][i];
      net_[k][j] = net;
      act_[k + 1][j] = logistic(net);
    }
  }
}

const std::vector<double>& MlpModel::forward(std::span<const double> v) {
  propagate_hidden(v);
  const std::size_t k = topo_.weight_layers() - 1;
  const std::size_t in = topo_.layer_size(k);
  const std::size_t out = topo_.outputs;
  for (std::size_t j = 0; j < out; ++j) {
    double net = b_[k][j];
    for (std::size_t i = 0; i < in; ++i) net += w_[k][i * out + j] * act_[k][i];
    net_[k][j] = net;
    act_[k + 1][j] = logistic(net);
  }
  forward_valid_ = true;
  full_forward_ = true;
  deltas_valid_ = false;
  return act_.back();
}

double MlpModel::forward_single_output(std::span<const double> v, std::size_t c) {
  if (c >= topo_.outputs) throw std::invalid_argument("output index out of range");
  propagate_hidden(v);
  const std::size_t k = topo_.weight_layers() - 1;
  const std::size_t in = topo_.layer_size(k);
  const std::size_t out = topo_.outputs;
  double net = b_[k][c];
  for (std::size_t i = 0; i < in; ++i) net += w_[k][i * out + c] * act_[k][i];
  net_[k][c] = net;
  act_[k + 1][c] = logistic(net);
  forward_valid_ = true;
  full_forward_ = false;
  presented_ = c;
  deltas_valid_ = false;
  return act_[k + 1][c];
}

void MlpModel::backprop_deltas(std::size_t c, double target) {
  if (!forward_valid_) throw std::logic_error("backprop_deltas called before forward");
  if (c >= topo_.outputs) throw std::invalid_argument("output index out of range");
  if (!full_forward_ && presented_ != c)
    throw std::logic_error("partial forward computed a different output unit");

  const std::size_t last = topo_.weight_layers() - 1;
  // Only the presented output carries error; the others were not evaluated.
  std::fill(delta_[last].begin(), delta_[last].end(), 0.0);
  const double alpha_c = act_[last + 1][c];
  delta_[last][c] = (target - alpha_c) * alpha_c * (1.0 - alpha_c);

  for (std::size_t k = last; k-- > 0;) {
    const std::size_t width = topo_.layer_size(k + 1);
    const std::size_t next_width = topo_.layer_size(k + 2);
    for (std::size_t i = 0; i < width; ++i) {
      double sum;
      if (k + 1 == last) {
        // Weights into the non-presented outputs carry no error.
        sum = w_[k + 1][i * next_width + c] * delta_[last][c];
      } else {
        sum = 0.0;
        for (std::size_t j = 0; j < next_width; ++j)
          sum += w_[k + 1][i * next_width + j] * delta_[k + 1][j];
      }
      const double a = act_[k + 1][i];
      delta_[k][i] = sum * a * (1.0 - a);
    }
  }
  deltas_valid_ = true;
  presented_ = c;
}

WeightGradient MlpModel::weight_gradient() const {
  if (!deltas_valid_) throw std::logic_error("weight_gradient called before backprop_deltas");
  WeightGradient g;
  g.w.resize(w_.size());
  g.b.resize(b_.size());
  for (std::size_t k = 0; k < w_.size(); ++k) {
    const std::size_t in = topo_.layer_size(k);
    const std::size_t out = topo_.layer_size(k + 1);
    g.w[k].resize(in * out);
    g.b[k].resize(out);
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t j = 0; j < out; ++j) g.w[k][i * out + j] = -delta_[k][j] * act_[k][i];
    for (std::size_t j = 0; j < out; ++j) g.b[k][j] = -delta_[k][j];
  }
  return g;
}

void MlpModel::input_gradient_into(std::span<double> h) const {
  if (!deltas_valid_) throw std::logic_error("input_gradient called before backprop_deltas");
  const std::size_t t = topo_.inputs;
  if (h.size() != t) throw std::invalid_argument("h width does not match topology");
  const std::size_t out = topo_.layer_size(1);
  if (hidden_layers() == 0) {
    const double d = delta_[0][presented_];
    for (std::size_t i = 0; i < t; ++i) h[i] = -(w_[0][i * out + presented_] * d);
  } else {
    for (std::size_t i = 0; i < t; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < out; ++j) sum += w_[0][i * out + j] * delta_[0][j];
      h[i] = -sum;
    }
  }
}

void MlpModel::input_gradient_via_sum(std::span<double> h) const {
  if (!deltas_valid_) throw std::logic_error("input_gradient called before backprop_deltas");
  const std::size_t t = topo_.inputs;
  if (h.size() != t) throw std::invalid_argument("h width does not match topology");
  const std::size_t out = topo_.layer_size(1);
  for (std::size_t i = 0; i < t; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < out; ++j) sum += w_[0][i * out + j] * delta_[0][j];
    h[i] = -sum;
  }
}

std::vector<double> MlpModel::input_gradient() const {
  std::vector<double> h(topo_.inputs);
  input_gradient_into(h);
  return h;
}

void MlpModel::sgd_step(std::size_t c, double eta, double lambda) {
  if (!deltas_valid_) throw std::logic_error("sgd_step called before backprop_deltas");
  const std::size_t last = topo_.weight_layers() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    const std::size_t in = topo_.layer_size(k);
    const std::size_t out = topo_.layer_size(k + 1);
    auto& w = w_[k];
    auto& b = b_[k];
    const auto& delta = delta_[k];
    const auto& a_in = act_[k];
    if (lambda == 0.0) {
      // Zero-delta units leave their weights bit-identical; skip them.
      if (k == last) {
        const double d = delta[c];
        if (d != 0.0) {
          for (std::size_t i = 0; i < in; ++i) w[i * out + c] -= eta * (-d * a_in[i]);
          b[c] -= eta * -d;
        }
      } else {
        for (std::size_t j = 0; j < out; ++j) {
          const double d = delta[j];
          if (d == 0.0) continue;
          for (std::size_t i = 0; i < in; ++i) w[i * out + j] -= eta * (-d * a_in[i]);
          b[j] -= eta * -d;
        }
      }
    } else {
      for (std::size_t i = 0; i < in; ++i)
        for (std::size_t j = 0; j < out; ++j) {
          const double g = -delta[j] * a_in[i];
          w[i * out + j] -= eta * (g + lambda * w[i * out + j]);
        }
      for (std::size_t j = 0; j < out; ++j) b[j] -= eta * (-delta[j] + lambda * b[j]);
    }
  }
}

MlpModel::Workspace MlpModel::make_workspace() const {
  Workspace ws;
  ws.act.resize(topo_.weight_layers() + 1);
  for (std::size_t k = 0; k <= topo_.weight_layers(); ++k) ws.act[k].resize(topo_.layer_size(k));
  return ws;
}

void MlpModel::predict(std::span<const double> v, std::span<double> out, Workspace& ws) const {
  if (v.size() != topo_.inputs) throw std::invalid_argument("input width does not match topology");
  if (out.size() != topo_.outputs) throw std::invalid_argument("output width does not match topology");
  std::copy(v.begin(), v.end(), ws.act[0].begin());
  for (std::size_t k = 0; k < topo_.weight_layers(); ++k) {
    const std::size_t in = topo_.layer_size(k);
    const std::size_t width = topo_.layer_size(k + 1);
    for (std::size_t j = 0; j < width; ++j) {
      double net = b_[k][j];
      for (std::size_t i = 0; i < in; ++i) net += w_[k][i * width + j] * ws.act[k][i];
      ws.act[k + 1][j] = logistic(net);
    }
  }
  std::copy(ws.act.back().begin(), ws.act.back().end(), out.begin());
}

std::vector<double> MlpModel::predict(std::span<const double> v) const {
  Workspace ws = make_workspace();
  std::vector<double> out(topo_.outputs);
  predict(v, out, ws);
  return out;
}

nlohmann::json MlpModel::to_json() const {
  nlohmann::json j;
  j["topology"] = {{"inputs", topo_.inputs}, {"hidden", topo_.hidden}, {"outputs", topo_.outputs}};
  j["weights"] = w_;
  j["biases"] = b_;
  return j;
}

MlpModel MlpModel::from_json(const nlohmann::json& j) {
  Topology topo;
  topo.inputs = j.at("topology").at("inputs").get<std::size_t>();
  topo.hidden = j.at("topology").at("hidden").get<std::vector<std::size_t>>();
  topo.outputs = j.at("topology").at("outputs").get<std::size_t>();
  MlpModel m(topo);
  auto w = j.at("weights").get<std::vector<std::vector<double>>>();
  auto b = j.at("biases").get<std::vector<std::vector<double>>>();
  if (w.size() != m.w_.size() || b.size() != m.b_.size())
    throw std::invalid_argument("serialized weight layer count does not match topology");
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k].size() != m.w_[k].size() || b[k].size() != m.b_[k].size())
      throw std::invalid_argument("serialized weight shape does not match topology");
  }
  m.w_ = std::move(w);
  m.b_ = std::move(b);
  return m;
}

}  // namespace ubp
