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
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "repbnn/graph.h"
#include "repbnn/tensor.h"

namespace repbnn {

/// Mutable NCHW buffer used during training. Unlike DenseTensor it is
/// rewritten in place by the optimizer.
struct Activation {
  Dims dims;
  std::vector<float> data;
};

/// A trainable or buffered parameter. Keys in ParamStore are
/// "<node_id>.<param_name>".
struct Param {
  Dims dims;
  std::vector<float> value;
  bool trainable = true;
};

using ParamStore = std::map<std::string, Param>;
using GradStore = std::map<std::string, std::vector<float>>;

std::string param_key(std::string_view node_id, std::string_view name);

/// Parameters per node kind:
///   conv kinds    weight (physical kernel dims; latent weights for binary)
///   BatchNorm     gamma, beta, running_mean, running_var (last two buffers)
///   PReLUShifted  shift_in, slope, shift_out
///   FC            weight (out, take, 1, 1), bias
/// BatchNorm gamma is 1 + bn_init_noise * N(0, 1) per channel.
ParamStore init_params(const Graph& g, std::uint64_t seed, float bn_init_noise);

inline constexpr float kBnEpsilon = 1e-5F;

/// Per-channel statistics of one BatchNorm in the last training forward.
struct BatchStats {
  std::vector<float> mean;
  std::vector<float> var;
};

/// Dense executor over a Graph. Binary convolutions apply sign() to their
/// latent weights; Sign nodes use sign(0) = +1 forward and the clipped
/// straight-through estimator (gradient passes where |x| <= 1) backward.
class Network {
 public:
  explicit Network(Graph graph);

  const Graph& graph() const { return graph_; }

  /// Runs every node and keeps all activations. In training mode BatchNorm
  /// normalizes with batch statistics (biased variance), recorded in
  /// batch_stats(); otherwise it uses the running buffers.
  const Activation& forward(const ParamStore& params, const Activation& input,
                            bool train, std::size_t threads = 1);

  const Activation& activation(std::string_view id) const;
  const Activation& output() const;
  const std::map<std::string, BatchStats>& batch_stats() const { return stats_; }

  /// Backpropagates dL/d(output) through the last training forward. When
  /// `input_grad` is given it receives dL/d(input).
  GradStore backward(const ParamStore& params, const Activation& grad_output,
                     std::size_t threads = 1, Activation* input_grad = nullptr) const;

 private:
  struct BnCache {
    std::vector<float> xhat;
    std::vector<float> inv_std;
  };

  Graph graph_;
  std::vector<std::size_t> order_;
  std::unordered_map<std::string, Activation> acts_;
  std::map<std::string, BatchStats> stats_;
  std::unordered_map<std::string, BnCache> bn_cache_;
  std::unordered_map<std::string, std::vector<std::size_t>> argmax_;
  bool trained_forward_ = false;
};

/// Runs fn(begin, end) over [0, count) split into at most `threads` chunks.
/// Chunks are disjoint; results are identical for any thread count as long
/// as fn writes only to locations owned by its range.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace repbnn
