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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "repbnn/tensor.h"

namespace repbnn {

enum class NodeKind {
  kInput,
  kConv,
  kBconv,
  kRepConv,
  kRepBconv,
  kBatchNorm,
  kSign,
  kReLU,
  kPReLUShifted,
  kAdd,
  kAvgPool,
  kMaxPool,
  kRepeat,
  kFC,
  kFlatten,
  kChannelPad,
};

std::string_view kind_name(NodeKind kind);
std::optional<NodeKind> kind_from_name(std::string_view name);
bool is_conv_kind(NodeKind kind);
bool is_binary_conv_kind(NodeKind kind);
bool is_rep_conv_kind(NodeKind kind);

struct NoAttrs {
  friend bool operator==(const NoAttrs&, const NoAttrs&) = default;
};

/// Nominal per-sample input extent; the batch size comes from the caller.
struct InputAttrs {
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  friend bool operator==(const InputAttrs&, const InputAttrs&) = default;
};

/// `share` > 1 marks a BN fed by replicated channels: normalization
/// statistics are computed once per unique channel and shared by the copies.
struct BatchNormAttrs {
  std::size_t channels = 0;
  std::size_t share = 1;
  friend bool operator==(const BatchNormAttrs&, const BatchNormAttrs&) = default;
};

struct ChannelAttrs {
  std::size_t channels = 0;
  friend bool operator==(const ChannelAttrs&, const ChannelAttrs&) = default;
};

/// A `global` pool reduces each plane to 1x1 and ignores kernel/stride.
struct PoolAttrs {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  bool global = false;
  friend bool operator==(const PoolAttrs&, const PoolAttrs&) = default;
};

/// `origin` names the node whose output this repeat dilates when the repeat
/// was inserted by RepTran; empty for repeats that belong to the topology.
struct RepeatAttrs {
  std::size_t times = 1;
  std::string origin;
  friend bool operator==(const RepeatAttrs&, const RepeatAttrs&) = default;
};

/// Fully connected layer consuming the first `take` of `in_features`
/// flattened inputs.
struct FCAttrs {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::size_t take = 0;
  friend bool operator==(const FCAttrs&, const FCAttrs&) = default;
};

/// Zero channels added ahead of and behind the input channels.
struct ChannelPadAttrs {
  std::size_t before = 0;
  std::size_t after = 0;
  friend bool operator==(const ChannelPadAttrs&, const ChannelPadAttrs&) = default;
};

using NodeAttrs = std::variant<NoAttrs, InputAttrs, ConvSpec, BatchNormAttrs,
                               ChannelAttrs, PoolAttrs, RepeatAttrs, FCAttrs,
                               ChannelPadAttrs>;

struct Node {
  std::string id;
  NodeKind kind = NodeKind::kInput;
  NodeAttrs attrs;
  std::vector<std::string> inputs;

  template <typename T>
  const T& as() const {
    return std::get<T>(attrs);
  }
  const ConvSpec& conv() const { return as<ConvSpec>(); }

  friend bool operator==(const Node&, const Node&) = default;
};

/// Network IR. Nodes keep insertion order; ids are unique.
class Graph {
 public:
  std::string name;
  /// Global channel-dilation factor; 1 for untransformed graphs.
  std::size_t beta = 1;
  /// Set by RepTran; transformed graphs are refused as pass input.
  bool transformed = false;
  std::vector<std::string> outputs;

  const Node& add(Node node);
  /// Appends and returns the id, for builder chains.
  std::string add(std::string id, NodeKind kind, NodeAttrs attrs,
                  std::vector<std::string> inputs = {});

  const std::vector<Node>& nodes() const { return nodes_; }
  bool contains(std::string_view id) const;
  const Node& node(std::string_view id) const;
  const Node* find(std::string_view id) const;
  /// Ids of nodes that list `id` as an input, in insertion order.
  std::vector<std::string> consumers(std::string_view id) const;
  const Node& input_node() const;
  const std::string& output_id() const;

  /// Nodes ordered so every node follows its inputs. Throws CycleDetected.
  std::vector<const Node*> topo_order() const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.name == b.name && a.beta == b.beta &&
           a.transformed == b.transformed && a.outputs == b.outputs &&
           a.nodes_ == b.nodes_;
  }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ShapeMap = std::map<std::string, Dims>;

/// Nominal (1, c, h, w) taken from the Input node.
Dims nominal_input_dims(const Graph& g);

/// Annotates every node with its output dims. Throws ShapeMismatch naming
/// the first inconsistent node, or CycleDetected.
ShapeMap infer_shapes(const Graph& g, const Dims& input_dims);
ShapeMap infer_shapes(const Graph& g);

/// Checks every structural invariant and that shapes infer at the nominal
/// input. Throws ValidationError listing each violation.
void validate(const Graph& g);

/// Parameter count of a conv node's kernel (c_out * c_in * kh * kw of the
/// physical kernel, which RepTran leaves unchanged).
std::size_t conv_params(const ConvSpec& spec);

// Text model format; the grammar is documented in docs/model_format.md.
std::string emit_model(const Graph& g);
Graph parse_model(std::string_view text);
Graph load_model(const std::string& path);
void save_model(const std::string& path, const Graph& g);

}  // namespace repbnn
