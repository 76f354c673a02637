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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repbnn/graph.h"

namespace repbnn {

/// Which slice of the beta-dilated features the final FC consumes. Blocks are
/// taken from the front: one full copy for 1/beta, a 1/beta^2 prefix for the
/// last policy.
enum class LastLayerPolicy { kTakeAll, kTakeOneOverBeta, kTakeOneOverBetaSquared };

enum class BnPosition { kAfterRepeat, kBeforeRepeat };

struct RepTranConfig {
  std::size_t beta = 2;
  LastLayerPolicy last_layer = LastLayerPolicy::kTakeAll;
  BnPosition bn_position = BnPosition::kAfterRepeat;

  /// Rejects beta < 2.
  void validate() const;
};

std::optional<LastLayerPolicy> parse_last_layer_policy(std::string_view text);
std::optional<BnPosition> parse_bn_position(std::string_view text);

/// Rewrites a baseline network into its replicated counterpart:
///  - the first full-precision conv is kept and its output repeated beta
///    times ahead of its BatchNorm;
///  - every Bconv becomes a RepBconv and every other full-precision conv
///    (downsampling bypasses, full-precision backbones) a RepConv, each
///    followed by a beta^2 Repeat;
///  - BatchNorm, PReLUShifted and ChannelPad channel attributes grow by beta;
///  - the final FC takes features per `cfg.last_layer`.
/// The input graph must validate and must not already be transformed.
Graph reptran(const Graph& g, const RepTranConfig& cfg);

/// reptran without the beta >= 2 check. With beta 1 the result differs from
/// the input only by kind renames and Repeat(times=1) nodes.
Graph apply_reptran_rules(const Graph& g, const RepTranConfig& cfg);

struct VerifyReport {
  std::vector<std::string> checks;
};

/// Checks that `after` = reptran(`before`, cfg) preserved conv parameters and
/// conv MAC/BOP counts node by node, dilated every backbone activation by
/// beta, and kept the network output dims. Throws VerificationFailed naming
/// the first violated assertion.
VerifyReport verify_transform(const Graph& before, const Graph& after,
                              const RepTranConfig& cfg);

/// The node in a transformed graph whose output corresponds to `id` of the
/// original graph: an inserted Repeat whose origin is `id`, else `id`.
std::string counterpart(const Graph& after, const std::string& id);

}  // namespace repbnn
