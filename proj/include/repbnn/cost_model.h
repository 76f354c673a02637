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

#include "repbnn/graph.h"

namespace repbnn {

/// Exact non-negative-denominator fraction over int64, always reduced.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  bool is_integer() const { return den_ == 1; }
  /// Integer text when exact, otherwise a decimal with six fractional digits.
  std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  friend bool operator==(const Rational&, const Rational&) = default;
  friend bool operator<(const Rational& a, const Rational& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// FLOPs charged per multiply-accumulate. One FLOP per MAC reproduces the
/// commonly reported stem-conv cost of ReActNet-A (32*3*9*112*112 = 1.084e7).
inline constexpr std::int64_t kFlopsPerMac = 1;
/// Binary operations per OP in the combined metric OPs = FLOPs + BOPs/64.
inline constexpr std::int64_t kBopsPerOp = 64;

enum class CostCategory { kConv, kBconv, kFC, kBatchNorm, kElementwise, kNone };

struct NodeCost {
  std::string id;
  NodeKind kind = NodeKind::kInput;
  CostCategory category = CostCategory::kNone;
  Rational flops;
  std::int64_t bops = 0;
  std::int64_t params = 0;
  /// Elements materialised by a Repeat (memory, not compute).
  std::int64_t repeat_elements = 0;
};

struct CostTotals {
  Rational fc_flops;
  Rational conv_flops;
  Rational bn_flops;
  /// Sign/ReLU/PReLUShifted/Add/pooling; outside the headline totals.
  Rational elementwise_flops;
  std::int64_t bops = 0;
  std::int64_t params = 0;
  std::int64_t repeat_elements = 0;

  /// FC + Conv + BN.
  Rational flops() const { return fc_flops + conv_flops + bn_flops; }
  Rational ops_without_bn() const {
    return fc_flops + conv_flops + Rational(bops, kBopsPerOp);
  }
  Rational ops_with_bn() const { return ops_without_bn() + bn_flops; }
};

struct CostReport {
  std::string graph_name;
  Dims input_dims;
  std::vector<NodeCost> per_node;
  CostTotals totals;
};

/// Per-node and aggregate costs of `g` at `input_dims` (nominal Input dims
/// when omitted). Conv/FC cost kFlopsPerMac per MAC, binary convs one BOP per
/// MAC, and a BatchNorm over E elements 2E FLOPs (normalize + scale). A BN
/// with share s only normalizes E/s^2 elements, so after RepTran its cost is
/// the original cost times bn_cost_factor(beta).
CostReport count(const Graph& g, std::optional<Dims> input_dims = std::nullopt);

/// 1/(2*beta) + beta/2.
Rational bn_cost_factor(std::size_t beta);

struct CostDelta {
  Rational fc_flops;
  Rational conv_flops;
  Rational bn_flops;
  std::int64_t bops = 0;
  std::int64_t params = 0;
  Rational ops_without_bn;
  Rational ops_with_bn;
};

/// after - before, per category and total. Values may be negative.
CostDelta diff(const CostReport& before, const CostReport& after);

/// Fixed-width per-node table plus totals. The footer also shows totals in
/// customary units (FLOPs x1e7, BOPs x1e9, OPs x1e8).
std::string render_table(const CostReport& report, bool with_bn);
/// `node_id\tkind\tflops\tbops\tparams` rows, then `#`-free totals rows of
/// the form `total\t<name>\t<value>`.
std::string render_tsv(const CostReport& report, bool with_bn);
std::string render_delta(const CostDelta& delta);

/// `value` in units of 10^exponent, three decimals ("0.102").
std::string scaled(const Rational& value, int exponent);

}  // namespace repbnn
