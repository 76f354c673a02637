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

#include "repbnn/graph.h"

#include <array>
#include <sstream>
#include <utility>

#include "repbnn/error.h"

namespace repbnn {

namespace {

constexpr std::array<std::pair<NodeKind, std::string_view>, 16> kKindNames{{
    {NodeKind::kInput, "Input"},
    {NodeKind::kConv, "Conv"},
    {NodeKind::kBconv, "Bconv"},
    {NodeKind::kRepConv, "RepConv"},
    {NodeKind::kRepBconv, "RepBconv"},
    {NodeKind::kBatchNorm, "BatchNorm"},
    {NodeKind::kSign, "Sign"},
    {NodeKind::kReLU, "ReLU"},
    {NodeKind::kPReLUShifted, "PReLUShifted"},
    {NodeKind::kAdd, "Add"},
    {NodeKind::kAvgPool, "AvgPool"},
    {NodeKind::kMaxPool, "MaxPool"},
    {NodeKind::kRepeat, "Repeat"},
    {NodeKind::kFC, "FC"},
    {NodeKind::kFlatten, "Flatten"},
    {NodeKind::kChannelPad, "ChannelPad"},
}};

[[noreturn]] void shape_error(const Node& node, const std::string& what) {
  throw Error(ErrorCode::kShapeMismatch, "node '" + node.id + "' (" +
                                             std::string(kind_name(node.kind)) +
                                             "): " + what);
}

void expect_inputs(const Node& node, std::size_t count) {
  if (node.inputs.size() != count) {
    shape_error(node, "expects " + std::to_string(count) + " input(s), has " +
                          std::to_string(node.inputs.size()));
  }
}

void expect_channels(const Node& node, const Dims& in, std::size_t channels) {
  if (in.c != channels) {
    shape_error(node, "input has " + std::to_string(in.c) +
                          " channels, node expects " + std::to_string(channels));
  }
}

Dims infer_node(const Node& node, const std::vector<Dims>& in,
                const Dims& input_dims) {
  switch (node.kind) {
    case NodeKind::kInput: {
      expect_inputs(node, 0);
      const auto& a = node.as<InputAttrs>();
      if (input_dims.c != a.c) {
        shape_error(node, "input dims " + input_dims.str() + " but node has " +
                              std::to_string(a.c) + " channels");
      }
      return input_dims;
    }
    case NodeKind::kConv:
    case NodeKind::kBconv:
    case NodeKind::kRepConv:
    case NodeKind::kRepBconv: {
      expect_inputs(node, 1);
      const ConvSpec& spec = node.conv();
      const bool rep = is_rep_conv_kind(node.kind);
      if (!rep && spec.beta != 1) shape_error(node, "plain conv with beta != 1");
      if (spec.c_out % spec.beta != 0) {
        throw Error(ErrorCode::kNonDivisibleChannels,
                    "node '" + node.id + "': beta does not divide c_out");
      }
      expect_channels(node, in[0], spec.physical_c_in());
      if (in[0].h + 2 * spec.padding < spec.kh ||
          in[0].w + 2 * spec.padding < spec.kw) {
        shape_error(node, "kernel larger than padded input " + in[0].str());
      }
      return {in[0].n, spec.physical_c_out(), spec.out_extent(in[0].h, spec.kh),
              spec.out_extent(in[0].w, spec.kw)};
    }
    case NodeKind::kBatchNorm:
      expect_inputs(node, 1);
      expect_channels(node, in[0], node.as<BatchNormAttrs>().channels);
      return in[0];
    case NodeKind::kPReLUShifted:
      expect_inputs(node, 1);
      expect_channels(node, in[0], node.as<ChannelAttrs>().channels);
      return in[0];
    case NodeKind::kSign:
    case NodeKind::kReLU:
      expect_inputs(node, 1);
      return in[0];
    case NodeKind::kAdd:
      if (in.size() < 2) shape_error(node, "Add needs at least two inputs");
      for (std::size_t i = 1; i < in.size(); ++i) {
        if (in[i] != in[0]) {
          shape_error(node, "operand dims " + in[0].str() + " vs " +
                                in[i].str());
        }
      }
      return in[0];
    case NodeKind::kAvgPool:
    case NodeKind::kMaxPool: {
      expect_inputs(node, 1);
      const auto& a = node.as<PoolAttrs>();
      if (a.global) return {in[0].n, in[0].c, 1, 1};
      if (in[0].h < a.kernel || in[0].w < a.kernel) {
        shape_error(node, "pool kernel larger than input " + in[0].str());
      }
      return {in[0].n, in[0].c, (in[0].h - a.kernel) / a.stride + 1,
              (in[0].w - a.kernel) / a.stride + 1};
    }
    case NodeKind::kRepeat:
      expect_inputs(node, 1);
      return {in[0].n, in[0].c * node.as<RepeatAttrs>().times, in[0].h,
              in[0].w};
    case NodeKind::kFlatten:
      expect_inputs(node, 1);
      return {in[0].n, in[0].sample_size(), 1, 1};
    case NodeKind::kFC: {
      expect_inputs(node, 1);
      const auto& a = node.as<FCAttrs>();
      if (in[0].sample_size() != a.in_features) {
        shape_error(node, "input has " + std::to_string(in[0].sample_size()) +
                              " features, node expects " +
                              std::to_string(a.in_features));
      }
      return {in[0].n, a.out_features, 1, 1};
    }
    case NodeKind::kChannelPad: {
      expect_inputs(node, 1);
      const auto& a = node.as<ChannelPadAttrs>();
      return {in[0].n, in[0].c + a.before + a.after, in[0].h, in[0].w};
    }
  }
  shape_error(node, "unknown kind");
}

// Attribute-level invariants, independent of shapes.
void check_attrs(const Node& node, std::vector<std::string>& problems) {
  auto bad = [&](const std::string& what) {
    problems.push_back("node '" + node.id + "': " + what);
  };
  switch (node.kind) {
    case NodeKind::kConv:
    case NodeKind::kBconv:
    case NodeKind::kRepConv:
    case NodeKind::kRepBconv: {
      const ConvSpec& s = node.conv();
      if (s.binary != is_binary_conv_kind(node.kind)) {
        bad("binary flag disagrees with kind");
      }
      try {
        s.validate();
      } catch (const Error& e) {
        bad(e.what());
      }
      break;
    }
    case NodeKind::kBatchNorm: {
      const auto& a = node.as<BatchNormAttrs>();
      if (a.channels == 0) bad("BatchNorm channels must be positive");
      if (a.share == 0 || a.channels % a.share != 0) {
        bad("BatchNorm share must divide channels");
      }
      break;
    }
    case NodeKind::kPReLUShifted:
      if (node.as<ChannelAttrs>().channels == 0) bad("channels must be positive");
      break;
    case NodeKind::kAvgPool:
    case NodeKind::kMaxPool: {
      const auto& a = node.as<PoolAttrs>();
      if (!a.global && (a.kernel == 0 || a.stride == 0)) {
        bad("pool kernel and stride must be positive");
      }
      break;
    }
    case NodeKind::kRepeat:
      if (node.as<RepeatAttrs>().times == 0) bad("Repeat.times must be >= 1");
      break;
    case NodeKind::kFC: {
      const auto& a = node.as<FCAttrs>();
      if (a.out_features == 0) bad("FC out must be positive");
      if (a.take == 0 || a.take > a.in_features) bad("FC take must be in [1, in]");
      break;
    }
    default:
      break;
  }
}

}  // namespace

std::string_view kind_name(NodeKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<NodeKind> kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool is_conv_kind(NodeKind kind) {
  return kind == NodeKind::kConv || kind == NodeKind::kBconv ||
         kind == NodeKind::kRepConv || kind == NodeKind::kRepBconv;
}

bool is_binary_conv_kind(NodeKind kind) {
  return kind == NodeKind::kBconv || kind == NodeKind::kRepBconv;
}

bool is_rep_conv_kind(NodeKind kind) {
  return kind == NodeKind::kRepConv || kind == NodeKind::kRepBconv;
}

const Node& Graph::add(Node node) {
  if (index_.contains(node.id)) {
    throw Error(ErrorCode::kValidationError, "duplicate node id '" + node.id + "'");
  }
  index_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
  return nodes_.back();
}

std::string Graph::add(std::string id, NodeKind kind, NodeAttrs attrs,
                       std::vector<std::string> inputs) {
  return add(Node{std::move(id), kind, std::move(attrs), std::move(inputs)}).id;
}

bool Graph::contains(std::string_view id) const {
  return index_.contains(std::string(id));
}

const Node* Graph::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const Node& Graph::node(std::string_view id) const {
  const Node* n = find(id);
  if (n == nullptr) {
    throw Error(ErrorCode::kUnknownLayer, "no node '" + std::string(id) + "'");
  }
  return *n;
}

std::vector<std::string> Graph::consumers(std::string_view id) const {
  std::vector<std::string> out;
  for (const Node& n : nodes_) {
    for (const auto& in : n.inputs) {
      if (in == id) {
        out.push_back(n.id);
        break;
      }
    }
  }
  return out;
}

const Node& Graph::input_node() const {
  const Node* found = nullptr;
  for (const Node& n : nodes_) {
    if (n.kind != NodeKind::kInput) continue;
    if (found != nullptr) {
      throw Error(ErrorCode::kValidationError, "graph has more than one Input");
    }
    found = &n;
  }
  if (found == nullptr) {
    throw Error(ErrorCode::kValidationError, "graph has no Input node");
  }
  return *found;
}

const std::string& Graph::output_id() const {
  if (outputs.empty()) {
    if (nodes_.empty()) throw Error(ErrorCode::kValidationError, "empty graph");
    return nodes_.back().id;
  }
  return outputs.front();
}

std::vector<const Node*> Graph::topo_order() const {
  // Kahn's algorithm, seeded in insertion order so the result is stable.
  std::vector<std::size_t> pending(nodes_.size(), 0);
  std::vector<std::vector<std::size_t>> users(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& in : nodes_[i].inputs) {
      auto it = index_.find(in);
      if (it == index_.end()) {
        throw Error(ErrorCode::kValidationError,
                    "node '" + nodes_[i].id + "' reads unknown node '" + in + "'");
      }
      ++pending[i];
      users[it->second].push_back(i);
    }
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (pending[i] == 0) ready.push_back(i);
  }
  std::vector<const Node*> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    const std::size_t i = ready.back();
    ready.pop_back();
    order.push_back(&nodes_[i]);
    // Push in reverse so lower indices pop first.
    for (auto it = users[i].rbegin(); it != users[i].rend(); ++it) {
      if (--pending[*it] == 0) ready.push_back(*it);
    }
  }
  if (order.size() != nodes_.size()) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (pending[i] != 0) {
        throw Error(ErrorCode::kCycleDetected,
                    "cycle through node '" + nodes_[i].id + "'");
      }
    }
  }
  return order;
}

Dims nominal_input_dims(const Graph& g) {
  const auto& a = g.input_node().as<InputAttrs>();
  return {1, a.c, a.h, a.w};
}

ShapeMap infer_shapes(const Graph& g, const Dims& input_dims) {
  ShapeMap shapes;
  std::vector<Dims> in;
  for (const Node* node : g.topo_order()) {
    in.clear();
    for (const auto& id : node->inputs) in.push_back(shapes.at(id));
    shapes.emplace(node->id, infer_node(*node, in, input_dims));
  }
  return shapes;
}

ShapeMap infer_shapes(const Graph& g) {
  return infer_shapes(g, nominal_input_dims(g));
}

void validate(const Graph& g) {
  std::vector<std::string> problems;
  std::size_t inputs = 0;
  for (const Node& n : g.nodes()) {
    if (n.kind == NodeKind::kInput) ++inputs;
    for (const auto& in : n.inputs) {
      if (!g.contains(in)) {
        problems.push_back("node '" + n.id + "' reads unknown node '" + in + "'");
      }
    }
    check_attrs(n, problems);
  }
  if (inputs != 1) {
    problems.push_back("graph must have exactly one Input node, has " +
                       std::to_string(inputs));
  }
  for (const auto& out : g.outputs) {
    if (!g.contains(out)) problems.push_back("unknown output '" + out + "'");
  }
  if (g.beta == 0) problems.push_back("beta must be >= 1");
  if (problems.empty()) {
    try {
      infer_shapes(g);
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      os << (i ? "; " : "") << problems[i];
    }
    throw Error(ErrorCode::kValidationError, os.str());
  }
}

std::size_t conv_params(const ConvSpec& spec) {
  return spec.physical_c_out() * spec.physical_c_in() * spec.kh * spec.kw;
}

}  // namespace repbnn
