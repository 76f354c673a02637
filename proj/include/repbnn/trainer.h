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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "repbnn/dataset.h"
#include "repbnn/graph.h"
#include "repbnn/network.h"

namespace repbnn {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  float learning_rate = 0.05F;
  float momentum = 0.9F;
  /// Applied to conv and FC weights only.
  float weight_decay = 1e-4F;
  std::uint64_t seed = 1;
  /// Fraction of the dataset held out for eval_acc. With no held-out
  /// samples eval_acc is measured on the training set.
  double eval_split = 0.2;
  float bn_init_noise = 0.01F;
  /// Running statistic update: running = (1 - m) * running + m * batch.
  float bn_momentum = 0.1F;
  /// Stop after this many optimizer steps; 0 runs every epoch in full.
  std::size_t max_steps = 0;
  std::size_t threads = 1;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double eval_acc = 0.0;
};

struct TrainResult {
  ParamStore params;
  std::vector<EpochMetrics> history;
  std::size_t steps = 0;
};

struct LossAndGrad {
  double loss = 0.0;
  Activation grad;
};

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. logits.
LossAndGrad softmax_cross_entropy(const Activation& logits,
                                  const std::vector<std::uint8_t>& labels);

/// SGD with momentum over a fixed graph. Batches are consumed in the order
/// given, so a run is reproducible bit for bit given the same inputs.
class Trainer {
 public:
  Trainer(Graph graph, ParamStore params, const TrainConfig& cfg);

  /// One forward/backward/update on a batch. Returns the batch loss and
  /// throws DivergedLoss when it is not finite.
  double step(const Activation& batch, const std::vector<std::uint8_t>& labels);

  /// Fraction of samples whose arg-max logit matches the label, in eval mode.
  double accuracy(const Dataset& d, const std::vector<std::size_t>& indices);

  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  Network& network() { return net_; }
  std::size_t steps() const { return steps_; }

 private:
  Network net_;
  ParamStore params_;
  std::map<std::string, std::vector<float>> velocity_;
  TrainConfig cfg_;
  std::size_t steps_ = 0;
};

/// Initializes parameters from cfg.seed and trains on `data`. The held-out
/// split and every epoch's shuffle are drawn from the same seed.
TrainResult train(const Graph& g, const Dataset& data, const TrainConfig& cfg);
TrainResult train(const Graph& g, const Dataset& data, const TrainConfig& cfg,
                  ParamStore initial);

/// Sign forward with the clipped straight-through backward: the derivative of
/// hardtanh, 1 on |x| <= 1 and 0 outside.
double ste_sign_grad(double x);
/// The surrogate the STE differentiates: clamp(x, -1, 1).
double hardtanh(double x);

/// Activations around one replicated conv, each holding `blocks` equal-size
/// channel blocks. Nodes are empty when the stage does not exist.
struct RepStages {
  std::string conv;
  std::size_t blocks = 0;
  std::string post_repeat;
  std::string post_bn;
  std::string post_residual;
};

/// Locates the stages after conv `conv_id` in a transformed graph:
///   after-repeat:  conv -> Repeat -> BatchNorm [-> Add]
///   before-repeat: conv -> BatchNorm -> Repeat [-> Add]
/// In the before-repeat layout post_repeat and post_bn name the same node.
/// Throws UnknownLayer for a missing id and NotRepGraph when the conv has no
/// inserted Repeat.
RepStages rep_stages(const Graph& g, const std::string& conv_id);

struct LayerDiversity {
  std::string layer;
  std::size_t blocks = 0;
  double post_repeat = 0.0;
  double post_bn = 0.0;
  std::optional<double> post_residual;
};

struct DiversityReport {
  std::vector<LayerDiversity> layers;
};

/// Mean pairwise L2 distance between the `blocks` channel blocks of `a`.
double block_distance(const Activation& a, std::size_t blocks);

/// For every RepConv/RepBconv, the block distance of its stages on an eval
/// forward of `probe`. Throws NotRepGraph unless g is transformed and has a
/// replicated conv.
DiversityReport channel_diversity(const Graph& g, const ParamStore& params,
                                  const Activation& probe);

/// Writes <layer>.post_repeat.bin, <layer>.post_bn.bin and, when the layer
/// has a residual add, <layer>.post_residual.bin into out_dir. Returns the
/// paths written.
std::vector<std::string> dump_features(const Graph& g, const ParamStore& params,
                                       const Activation& input, const std::string& layer,
                                       const std::string& out_dir);

}  // namespace repbnn
