// Copyright 2026 The RepBNN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "repbnn/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "repbnn/error.h"

namespace repbnn {

namespace {

bool decays(const std::string& key, const Graph& g) {
  const auto dot = key.rfind('.');
  if (key.substr(dot + 1) != "weight") return false;
  const Node& n = g.node(key.substr(0, dot));
  return is_conv_kind(n.kind) || n.kind == NodeKind::kFC;
}

const Node* repeat_of(const Graph& g, const std::string& origin) {
  for (const Node& n : g.nodes()) {
    if (n.kind == NodeKind::kRepeat && n.as<RepeatAttrs>().origin == origin) return &n;
  }
  return nullptr;
}

const Node* sole_consumer(const Graph& g, const std::string& id, NodeKind kind) {
  const auto users = g.consumers(id);
  if (users.size() != 1) return nullptr;
  const Node& n = g.node(users[0]);
  return n.kind == kind ? &n : nullptr;
}

std::string add_consumer(const Graph& g, const std::string& id) {
  for (const auto& user : g.consumers(id)) {
    if (g.node(user).kind == NodeKind::kAdd) return user;
  }
  return {};
}

void check_dataset(const Graph& g, const Dataset& d) {
  const Dims in = nominal_input_dims(g);
  if (in.c != d.sample_dims.c || in.h != d.sample_dims.h || in.w != d.sample_dims.w) {
    throw Error(ErrorCode::kDatasetError, "dataset samples are " + d.sample_dims.str() +
                                              " but the graph expects " + in.str());
  }
  if (d.size() == 0) throw Error(ErrorCode::kDatasetError, "dataset is empty");
  const Dims out = infer_shapes(g).at(g.output_id());
  if (out.sample_size() < d.classes) {
    throw Error(ErrorCode::kDatasetError,
                "graph has " + std::to_string(out.sample_size()) + " outputs for " +
                    std::to_string(d.classes) + " classes");
  }
}

}  // namespace

LossAndGrad softmax_cross_entropy(const Activation& logits,
                                  const std::vector<std::uint8_t>& labels) {
  const std::size_t n = logits.dims.n;
  const std::size_t k = logits.dims.sample_size();
  if (labels.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "label count does not match the batch");
  }
  LossAndGrad r{0.0, {logits.dims, std::vector<float>(logits.data.size())}};
  for (std::size_t b = 0; b < n; ++b) {
    const float* z = &logits.data[b * k];
    const float zmax = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += std::exp(static_cast<double>(z[i] - zmax));
    const double log_sum = std::log(sum);
    r.loss += log_sum - static_cast<double>(z[labels[b]] - zmax);
    for (std::size_t i = 0; i < k; ++i) {
      const double p = std::exp(static_cast<double>(z[i] - zmax) - log_sum);
      r.grad.data[b * k + i] =
          static_cast<float>((p - (i == labels[b] ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  r.loss /= static_cast<double>(n);
  return r;
}

Trainer::Trainer(Graph graph, ParamStore params, const TrainConfig& cfg)
    : net_(std::move(graph)), params_(std::move(params)), cfg_(cfg) {
  if (cfg_.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
}

double Trainer::step(const Activation& batch, const std::vector<std::uint8_t>& labels) {
  net_.forward(params_, batch, true, cfg_.threads);
  LossAndGrad lg = softmax_cross_entropy(net_.output(), labels);
  if (!std::isfinite(lg.loss)) {
    throw Error(ErrorCode::kDivergedLoss, "loss is " + std::to_string(lg.loss) + " at step " +
                                              std::to_string(steps_));
  }
  const GradStore grads = net_.backward(params_, lg.grad, cfg_.threads);
  for (const auto& [key, grad] : grads) {
    Param& p = params_.at(key);
    if (!p.trainable) continue;
    auto& v = velocity_[key];
    v.resize(grad.size(), 0.0F);
    const float wd = decays(key, net_.graph()) ? cfg_.weight_decay : 0.0F;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      v[i] = cfg_.momentum * v[i] + grad[i] + wd * p.value[i];
      p.value[i] -= cfg_.learning_rate * v[i];
    }
  }
  const float m = cfg_.bn_momentum;
  for (const auto& [id, st] : net_.batch_stats()) {
    auto& mean = params_.at(param_key(id, "running_mean")).value;
    auto& var = params_.at(param_key(id, "running_var")).value;
    for (std::size_t c = 0; c < mean.size(); ++c) {
      mean[c] = (1.0F - m) * mean[c] + m * st.mean[c];
      var[c] = (1.0F - m) * var[c] + m * st.var[c];
    }
  }
  ++steps_;
  return lg.loss;
}

double Trainer::accuracy(const Dataset& d, const std::vector<std::size_t>& indices) {
  if (indices.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < indices.size(); begin += cfg_.batch_size) {
    const std::vector<std::size_t> chunk(
        indices.begin() + static_cast<std::ptrdiff_t>(begin),
        indices.begin() + static_cast<std::ptrdiff_t>(
                              std::min(indices.size(), begin + cfg_.batch_size)));
    const Activation& out = net_.forward(params_, d.batch(chunk), false, cfg_.threads);
    const std::size_t k = out.dims.sample_size();
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const float* z = &out.data[b * k];
      const auto best = static_cast<std::size_t>(std::max_element(z, z + k) - z);
      if (best == d.labels[chunk[b]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

TrainResult train(const Graph& g, const Dataset& data, const TrainConfig& cfg) {
  return train(g, data, cfg, init_params(g, cfg.seed, cfg.bn_init_noise));
}

TrainResult train(const Graph& g, const Dataset& data, const TrainConfig& cfg,
                  ParamStore initial) {
  validate(g);
  check_dataset(g, data);
  if (cfg.eval_split < 0.0 || cfg.eval_split >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "eval split must be in [0, 1)");
  }
  std::mt19937_64 rng(cfg.seed + 1);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_eval = static_cast<std::size_t>(
      std::floor(cfg.eval_split * static_cast<double>(data.size())));
  std::vector<std::size_t> eval(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_eval));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_eval),
                                     order.end());
  if (train_idx.empty()) throw Error(ErrorCode::kDatasetError, "no training samples left");
  const std::vector<std::size_t>& eval_set = eval.empty() ? train_idx : eval;

  Trainer trainer(g, std::move(initial), cfg);
  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    bool stopped = false;
    for (std::size_t begin = 0; begin < train_idx.size(); begin += cfg.batch_size) {
      if (cfg.max_steps != 0 && trainer.steps() >= cfg.max_steps) {
        stopped = true;
        break;
      }
      const std::vector<std::size_t> chunk(
          train_idx.begin() + static_cast<std::ptrdiff_t>(begin),
          train_idx.begin() + static_cast<std::ptrdiff_t>(
                                  std::min(train_idx.size(), begin + cfg.batch_size)));
      std::vector<std::uint8_t> labels;
      labels.reserve(chunk.size());
      for (std::size_t i : chunk) labels.push_back(data.labels[i]);
      loss_sum += trainer.step(data.batch(chunk), labels) * static_cast<double>(chunk.size());
      seen += chunk.size();
    }
    if (seen > 0) {
      result.history.push_back(
          {epoch, loss_sum / static_cast<double>(seen), trainer.accuracy(data, eval_set)});
    }
    if (stopped) break;
  }
  result.steps = trainer.steps();
  result.params = std::move(trainer.params());
  return result;
}

double hardtanh(double x) { return std::clamp(x, -1.0, 1.0); }

double ste_sign_grad(double x) { return std::fabs(x) <= 1.0 ? 1.0 : 0.0; }

RepStages rep_stages(const Graph& g, const std::string& conv_id) {
  const Node* conv = g.find(conv_id);
  if (conv == nullptr) throw Error(ErrorCode::kUnknownLayer, "no layer '" + conv_id + "'");
  if (!is_conv_kind(conv->kind)) {
    throw Error(ErrorCode::kNotRepGraph, "'" + conv_id + "' is not a conv layer");
  }
  RepStages s;
  s.conv = conv_id;
  if (const Node* rep = repeat_of(g, conv_id)) {
    s.blocks = rep->as<RepeatAttrs>().times;
    s.post_repeat = rep->id;
    const Node* bn = sole_consumer(g, rep->id, NodeKind::kBatchNorm);
    if (bn != nullptr) s.post_bn = bn->id;
    s.post_residual = add_consumer(g, bn != nullptr ? bn->id : rep->id);
    return s;
  }
  if (const Node* bn = sole_consumer(g, conv_id, NodeKind::kBatchNorm)) {
    if (const Node* rep = repeat_of(g, bn->id)) {
      s.blocks = rep->as<RepeatAttrs>().times;
      s.post_repeat = rep->id;
      s.post_bn = rep->id;
      s.post_residual = add_consumer(g, rep->id);
      return s;
    }
  }
  throw Error(ErrorCode::kNotRepGraph, "layer '" + conv_id + "' has no replicated output");
}

double block_distance(const Activation& a, std::size_t blocks) {
  if (blocks < 2) return 0.0;
  if (a.dims.c % blocks != 0) {
    throw Error(ErrorCode::kNonDivisibleChannels, std::to_string(a.dims.c) +
                                                      " channels do not split into " +
                                                      std::to_string(blocks) + " blocks");
  }
  const std::size_t block = a.dims.c / blocks * a.dims.plane();
  const std::size_t sample = a.dims.sample_size();
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < blocks; ++i) {
    for (std::size_t j = i + 1; j < blocks; ++j) {
      double sq = 0.0;
      for (std::size_t n = 0; n < a.dims.n; ++n) {
        const float* p = &a.data[n * sample + i * block];
        const float* q = &a.data[n * sample + j * block];
        for (std::size_t k = 0; k < block; ++k) {
          const double d = static_cast<double>(p[k]) - q[k];
          sq += d * d;
        }
      }
      total += std::sqrt(sq);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

DiversityReport channel_diversity(const Graph& g, const ParamStore& params,
                                  const Activation& probe) {
  if (!g.transformed) throw Error(ErrorCode::kNotRepGraph, "graph is not RepTran output");
  Network net(g);
  net.forward(params, probe, false);
  DiversityReport report;
  for (const Node* n : g.topo_order()) {
    if (!is_rep_conv_kind(n->kind)) continue;
    const RepStages s = rep_stages(g, n->id);
    LayerDiversity d;
    d.layer = n->id;
    d.blocks = s.blocks;
    d.post_repeat = block_distance(net.activation(s.post_repeat), s.blocks);
    d.post_bn = s.post_bn.empty() ? d.post_repeat
                                  : block_distance(net.activation(s.post_bn), s.blocks);
    if (!s.post_residual.empty()) {
      d.post_residual = block_distance(net.activation(s.post_residual), s.blocks);
    }
    report.layers.push_back(d);
  }
  if (report.layers.empty()) {
    throw Error(ErrorCode::kNotRepGraph, "graph has no replicated conv layer");
  }
  return report;
}

std::vector<std::string> dump_features(const Graph& g, const ParamStore& params,
                                       const Activation& input, const std::string& layer,
                                       const std::string& out_dir) {
  const RepStages s = rep_stages(g, layer);
  Network net(g);
  net.forward(params, input, false);
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  auto dump = [&](const std::string& node, const char* stage) {
    if (node.empty()) return;
    const Activation& a = net.activation(node);
    const std::string path =
        (std::filesystem::path(out_dir) / (layer + "." + stage + ".bin")).string();
    save_blob(path, DenseTensor(a.dims, a.data));
    written.push_back(path);
  };
  dump(s.post_repeat, "post_repeat");
  dump(s.post_bn, "post_bn");
  dump(s.post_residual, "post_residual");
  return written;
}

}  // namespace repbnn
