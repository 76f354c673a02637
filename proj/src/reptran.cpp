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

#include "repbnn/reptran.h"

#include <map>
#include <sstream>

#include "repbnn/error.h"

namespace repbnn {

namespace {

std::string fresh_id(const Graph& g0, const Graph& g1, const std::string& base) {
  std::string id = base;
  for (int i = 2; g0.contains(id) || g1.contains(id); ++i) {
    id = base + std::to_string(i);
  }
  return id;
}

// BN that the BeforeRepeat policy pulls ahead of a conv's Repeat.
struct CapturedBn {
  std::string conv_id;
  std::size_t times = 1;
  std::size_t physical_channels = 0;
};

[[noreturn]] void non_divisible(const Node& n, std::size_t value, std::size_t beta) {
  throw Error(ErrorCode::kNonDivisibleChannels,
              "node '" + n.id + "': " + std::to_string(value) +
                  " channels not divisible by beta " + std::to_string(beta));
}

}  // namespace

void RepTranConfig::validate() const {
  if (beta < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "beta must be >= 2, got " + std::to_string(beta));
  }
}

std::optional<LastLayerPolicy> parse_last_layer_policy(std::string_view text) {
  if (text == "take-all") return LastLayerPolicy::kTakeAll;
  if (text == "take-1-over-beta") return LastLayerPolicy::kTakeOneOverBeta;
  if (text == "take-1-over-beta2") return LastLayerPolicy::kTakeOneOverBetaSquared;
  return std::nullopt;
}

std::optional<BnPosition> parse_bn_position(std::string_view text) {
  if (text == "after") return BnPosition::kAfterRepeat;
  if (text == "before") return BnPosition::kBeforeRepeat;
  return std::nullopt;
}

Graph reptran(const Graph& g, const RepTranConfig& cfg) {
  cfg.validate();
  return apply_reptran_rules(g, cfg);
}

Graph apply_reptran_rules(const Graph& g0, const RepTranConfig& cfg) {
  if (cfg.beta == 0) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be positive");
  }
  if (g0.transformed) {
    throw Error(ErrorCode::kValidationError,
                "graph '" + g0.name + "' is already transformed");
  }
  validate(g0);
  const std::size_t beta = cfg.beta;
  const auto order = g0.topo_order();

  // The first layer is the first conv reached in topological order; it has
  // to be full precision so it can feed beta copies to the binary backbone.
  const Node* first_conv = nullptr;
  for (const Node* n : order) {
    if (is_conv_kind(n->kind)) {
      first_conv = n;
      break;
    }
  }
  if (first_conv == nullptr || first_conv->kind != NodeKind::kConv) {
    throw Error(ErrorCode::kUnsupportedNode,
                "graph has no full-precision first-layer conv");
  }

  Graph g1;
  g1.name = g0.name;
  g1.beta = beta;
  g1.transformed = true;

  std::map<std::string, std::string> remap;
  std::map<std::string, CapturedBn> captured;
  auto mapped = [&](const std::string& id) {
    auto it = remap.find(id);
    return it == remap.end() ? id : it->second;
  };
  auto mapped_inputs = [&](const Node& n) {
    std::vector<std::string> ins;
    for (const auto& in : n.inputs) ins.push_back(mapped(in));
    return ins;
  };

  // Emits the conv's replication. Under BeforeRepeat a sole BatchNorm
  // consumer is moved ahead of the Repeat and emits it instead.
  auto attach_repeat = [&](const Node& conv, std::size_t times,
                           std::size_t physical_channels) {
    const auto users = g0.consumers(conv.id);
    if (cfg.bn_position == BnPosition::kBeforeRepeat && users.size() == 1 &&
        g0.node(users.front()).kind == NodeKind::kBatchNorm) {
      captured[users.front()] = {conv.id, times, physical_channels};
      return;
    }
    const auto rep = g1.add(fresh_id(g0, g1, conv.id + ".rep"), NodeKind::kRepeat,
                            RepeatAttrs{times, conv.id}, {conv.id});
    remap[conv.id] = rep;
  };

  for (const Node* np : order) {
    const Node& n = *np;
    Node out{n.id, n.kind, n.attrs, mapped_inputs(n)};
    switch (n.kind) {
      case NodeKind::kInput:
      case NodeKind::kSign:
      case NodeKind::kReLU:
      case NodeKind::kAdd:
      case NodeKind::kAvgPool:
      case NodeKind::kMaxPool:
      case NodeKind::kRepeat:
      case NodeKind::kFlatten:
        g1.add(std::move(out));
        break;
      case NodeKind::kConv:
      case NodeKind::kBconv: {
        if (&n == first_conv) {
          g1.add(std::move(out));
          attach_repeat(n, beta, n.conv().c_out);
          break;
        }
        ConvSpec spec = n.conv();
        if (spec.c_out % beta != 0) non_divisible(n, spec.c_out, beta);
        spec.beta = beta;
        out.kind = n.kind == NodeKind::kConv ? NodeKind::kRepConv : NodeKind::kRepBconv;
        out.attrs = spec;
        g1.add(std::move(out));
        attach_repeat(n, beta * beta, spec.physical_c_out());
        break;
      }
      case NodeKind::kBatchNorm: {
        const auto& a = n.as<BatchNormAttrs>();
        if (auto it = captured.find(n.id); it != captured.end()) {
          out.attrs = BatchNormAttrs{it->second.physical_channels, 1};
          g1.add(std::move(out));
          const auto rep = g1.add(fresh_id(g0, g1, n.id + ".rep"), NodeKind::kRepeat,
                                  RepeatAttrs{it->second.times, n.id}, {n.id});
          remap[n.id] = rep;
          break;
        }
        // Normalization is shared across copies only when the BN reads a
        // replicated conv output directly.
        const Node* src = g1.find(out.inputs.front());
        const bool after_repeat = src != nullptr && src->kind == NodeKind::kRepeat &&
                                  !src->as<RepeatAttrs>().origin.empty();
        out.attrs = BatchNormAttrs{a.channels * beta, after_repeat ? beta : 1};
        g1.add(std::move(out));
        break;
      }
      case NodeKind::kPReLUShifted:
        out.attrs = ChannelAttrs{n.as<ChannelAttrs>().channels * beta};
        g1.add(std::move(out));
        break;
      case NodeKind::kChannelPad: {
        const auto& a = n.as<ChannelPadAttrs>();
        out.attrs = ChannelPadAttrs{a.before * beta, a.after * beta};
        g1.add(std::move(out));
        break;
      }
      case NodeKind::kFC: {
        const auto& a = n.as<FCAttrs>();
        FCAttrs fc = a;
        fc.in_features = a.in_features * beta;
        switch (cfg.last_layer) {
          case LastLayerPolicy::kTakeAll:
            fc.take = a.take * beta;
            break;
          case LastLayerPolicy::kTakeOneOverBeta:
            fc.take = a.take;
            break;
          case LastLayerPolicy::kTakeOneOverBetaSquared:
            if (a.take % beta != 0) non_divisible(n, a.take, beta);
            fc.take = a.take / beta;
            break;
        }
        out.attrs = fc;
        g1.add(std::move(out));
        break;
      }
      case NodeKind::kRepConv:
      case NodeKind::kRepBconv:
        throw Error(ErrorCode::kUnsupportedNode,
                    "node '" + n.id + "' is already a " +
                        std::string(kind_name(n.kind)));
    }
  }
  for (const auto& o : g0.outputs) g1.outputs.push_back(mapped(o));
  validate(g1);
  return g1;
}

std::string counterpart(const Graph& after, const std::string& id) {
  for (const Node& n : after.nodes()) {
    if (n.kind == NodeKind::kRepeat && n.as<RepeatAttrs>().origin == id) {
      return n.id;
    }
  }
  return id;
}

VerifyReport verify_transform(const Graph& before, const Graph& after,
                              const RepTranConfig& cfg) {
  VerifyReport report;
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kVerificationFailed, what);
  };
  auto pass = [&](std::string what) { report.checks.push_back(std::move(what)); };

  if (!after.transformed) fail("graph '" + after.name + "' is not marked transformed");
  if (after.beta != cfg.beta) {
    fail("graph beta " + std::to_string(after.beta) + " != configured beta " +
         std::to_string(cfg.beta));
  }
  pass("transformed marker and beta=" + std::to_string(cfg.beta));

  std::size_t convs = 0;
  for (const Node& n0 : before.nodes()) {
    if (!is_conv_kind(n0.kind)) continue;
    const Node* n1 = after.find(n0.id);
    if (n1 == nullptr || !is_conv_kind(n1->kind)) {
      fail("conv node '" + n0.id + "' missing after transform");
    }
    if (is_binary_conv_kind(n0.kind) != is_binary_conv_kind(n1->kind)) {
      fail("conv node '" + n0.id + "' changed precision");
    }
    const std::size_t p0 = conv_params(n0.conv());
    const std::size_t p1 = conv_params(n1->conv());
    if (p0 != p1) {
      fail("conv node '" + n0.id + "' parameters " + std::to_string(p0) + " -> " +
           std::to_string(p1));
    }
    ++convs;
  }
  pass("conv parameter counts equal on " + std::to_string(convs) + " nodes");

  ShapeMap s0;
  ShapeMap s1;
  const Dims input = nominal_input_dims(before);
  try {
    s0 = infer_shapes(before, input);
    s1 = infer_shapes(after, input);
  } catch (const Error& e) {
    fail(std::string("shape inference failed: ") + e.what());
  }

  for (const Node& n0 : before.nodes()) {
    if (!is_conv_kind(n0.kind)) continue;
    const Node& n1 = after.node(n0.id);
    const Dims& o0 = s0.at(n0.id);
    const Dims& o1 = s1.at(n1.id);
    const std::size_t m0 = conv_params(n0.conv()) * o0.n * o0.h * o0.w;
    const std::size_t m1 = conv_params(n1.conv()) * o1.n * o1.h * o1.w;
    if (m0 != m1) {
      fail("conv node '" + n0.id + "' " +
           (is_binary_conv_kind(n0.kind) ? "BOPs " : "MACs ") +
           std::to_string(m0) + " -> " + std::to_string(m1));
    }
  }
  pass("conv MAC/BOP counts equal node by node");

  std::size_t dilated = 0;
  for (const Node& n0 : before.nodes()) {
    if (n0.kind == NodeKind::kInput || n0.kind == NodeKind::kFC) continue;
    const std::string id1 = counterpart(after, n0.id);
    // Under BeforeRepeat a conv's dilated activation is its BN's Repeat,
    // which is checked when the BN is visited.
    if (is_conv_kind(n0.kind) && id1 == n0.id) continue;
    if (!s1.contains(id1)) fail("node '" + n0.id + "' has no counterpart");
    const Dims& d0 = s0.at(n0.id);
    const Dims& d1 = s1.at(id1);
    if (d1.c != d0.c * cfg.beta || d1.h != d0.h || d1.w != d0.w || d1.n != d0.n) {
      fail("activation '" + n0.id + "' " + d0.str() + " -> '" + id1 + "' " +
           d1.str() + " is not a beta-fold channel dilation");
    }
    ++dilated;
  }
  pass("channel dilation x" + std::to_string(cfg.beta) + " on " +
       std::to_string(dilated) + " activations");

  const Dims out0 = s0.at(before.output_id());
  const Dims out1 = s1.at(after.output_id());
  if (out0 != out1) fail("output dims " + out0.str() + " -> " + out1.str());
  pass("output dims " + out0.str() + " preserved");
  return report;
}

}  // namespace repbnn
