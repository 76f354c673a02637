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

#include "repbnn/cost_model.h"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "repbnn/error.h"

namespace repbnn {

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error(ErrorCode::kInvalidArgument, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = g ? num / g : 0;
  den_ = g ? den / g : 1;
}

Rational operator+(const Rational& a, const Rational& b) {
  const std::int64_t l = std::lcm(a.den_, b.den_);
  return Rational(a.num_ * (l / a.den_) + b.num_ * (l / b.den_), l);
}

Rational operator-(const Rational& a, const Rational& b) {
  return a + Rational(-b.num_, b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  const Rational x(a.num_, b.den_);
  const Rational y(b.num_, a.den_);
  return Rational(x.num_ * y.num_, x.den_ * y.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  return a * Rational(b.den_, b.num_);
}

bool operator<(const Rational& a, const Rational& b) {
  return (a - b).num_ < 0;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << to_double();
  return os.str();
}

Rational bn_cost_factor(std::size_t beta) {
  if (beta == 0) throw Error(ErrorCode::kInvalidArgument, "beta must be >= 1");
  const auto b = static_cast<std::int64_t>(beta);
  return Rational(1, 2 * b) + Rational(b, 2);
}

CostReport count(const Graph& g, std::optional<Dims> input_dims) {
  CostReport report;
  report.graph_name = g.name;
  report.input_dims = input_dims.value_or(nominal_input_dims(g));
  const ShapeMap shapes = infer_shapes(g, report.input_dims);
  CostTotals& t = report.totals;

  for (const Node* np : g.topo_order()) {
    const Node& n = *np;
    const Dims& out = shapes.at(n.id);
    const auto elems = static_cast<std::int64_t>(out.numel());
    NodeCost c{n.id, n.kind, CostCategory::kNone, {}, 0, 0, 0};
    switch (n.kind) {
      case NodeKind::kConv:
      case NodeKind::kBconv:
      case NodeKind::kRepConv:
      case NodeKind::kRepBconv: {
        const ConvSpec& s = n.conv();
        c.params = static_cast<std::int64_t>(conv_params(s));
        const std::int64_t macs =
            c.params * static_cast<std::int64_t>(out.n * out.h * out.w);
        if (is_binary_conv_kind(n.kind)) {
          c.category = CostCategory::kBconv;
          c.bops = macs;
          t.bops += macs;
        } else {
          c.category = CostCategory::kConv;
          c.flops = Rational(macs * kFlopsPerMac);
          t.conv_flops += c.flops;
        }
        break;
      }
      case NodeKind::kBatchNorm: {
        const auto& a = n.as<BatchNormAttrs>();
        const auto share = static_cast<std::int64_t>(a.share);
        c.category = CostCategory::kBatchNorm;
        c.params = 2 * static_cast<std::int64_t>(a.channels);
        // Scaling touches every element; normalization only the unique ones.
        c.flops = Rational(elems) + Rational(elems, share * share);
        t.bn_flops += c.flops;
        break;
      }
      case NodeKind::kFC: {
        const auto& a = n.as<FCAttrs>();
        const auto take = static_cast<std::int64_t>(a.take);
        const auto outs = static_cast<std::int64_t>(a.out_features);
        c.category = CostCategory::kFC;
        c.params = take * outs + outs;
        c.flops = Rational(take * outs * static_cast<std::int64_t>(out.n) * kFlopsPerMac);
        t.fc_flops += c.flops;
        break;
      }
      case NodeKind::kPReLUShifted:
        c.params = 3 * static_cast<std::int64_t>(n.as<ChannelAttrs>().channels);
        [[fallthrough]];
      case NodeKind::kSign:
      case NodeKind::kReLU:
        c.category = CostCategory::kElementwise;
        c.flops = Rational(elems);
        t.elementwise_flops += c.flops;
        break;
      case NodeKind::kAdd:
        c.category = CostCategory::kElementwise;
        c.flops = Rational(elems * static_cast<std::int64_t>(n.inputs.size() - 1));
        t.elementwise_flops += c.flops;
        break;
      case NodeKind::kAvgPool:
      case NodeKind::kMaxPool: {
        c.category = CostCategory::kElementwise;
        const Dims& in = shapes.at(n.inputs.front());
        const auto& p = n.as<PoolAttrs>();
        const std::int64_t window =
            p.global ? static_cast<std::int64_t>(in.plane())
                     : static_cast<std::int64_t>(p.kernel * p.kernel);
        c.flops = Rational(elems * window);
        t.elementwise_flops += c.flops;
        break;
      }
      case NodeKind::kRepeat:
        c.repeat_elements = elems;
        t.repeat_elements += elems;
        break;
      default:
        break;
    }
    t.params += c.params;
    report.per_node.push_back(std::move(c));
  }
  return report;
}

CostDelta diff(const CostReport& before, const CostReport& after) {
  const CostTotals& a = before.totals;
  const CostTotals& b = after.totals;
  return CostDelta{b.fc_flops - a.fc_flops,
                   b.conv_flops - a.conv_flops,
                   b.bn_flops - a.bn_flops,
                   b.bops - a.bops,
                   b.params - a.params,
                   b.ops_without_bn() - a.ops_without_bn(),
                   b.ops_with_bn() - a.ops_with_bn()};
}

std::string scaled(const Rational& value, int exponent) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", value.to_double() / std::pow(10.0, exponent));
  return buf;
}

namespace {

void totals_rows(std::ostringstream& os, const CostTotals& t, bool with_bn,
                 const char* sep) {
  auto row = [&](const char* name, const std::string& value) {
    os << "total" << sep << name << sep << value << '\n';
  };
  row("fc_flops", t.fc_flops.str());
  row("conv_flops", t.conv_flops.str());
  row("bn_flops", t.bn_flops.str());
  row("bconv_bops", std::to_string(t.bops));
  row("elementwise_flops", t.elementwise_flops.str());
  row("params", std::to_string(t.params));
  row("repeat_elements", std::to_string(t.repeat_elements));
  row("ops_without_bn", t.ops_without_bn().str());
  row("ops_with_bn", t.ops_with_bn().str());
  row("ops", (with_bn ? t.ops_with_bn() : t.ops_without_bn()).str());
}

}  // namespace

std::string render_table(const CostReport& r, bool with_bn) {
  std::ostringstream os;
  os << "graph " << r.graph_name << " input " << r.input_dims.str() << '\n';
  os << std::left << std::setw(24) << "node" << std::setw(14) << "kind"
     << std::right << std::setw(16) << "flops" << std::setw(16) << "bops"
     << std::setw(12) << "params" << '\n';
  for (const auto& c : r.per_node) {
    if (c.category == CostCategory::kNone && c.params == 0) continue;
    os << std::left << std::setw(24) << c.id << std::setw(14) << kind_name(c.kind)
       << std::right << std::setw(16) << c.flops.str() << std::setw(16) << c.bops
       << std::setw(12) << c.params << '\n';
  }
  const CostTotals& t = r.totals;
  os << '\n';
  os << "FC FLOPs        " << std::setw(16) << t.fc_flops.str() << "  ("
     << scaled(t.fc_flops, 7) << "e7)\n";
  os << "Conv FLOPs      " << std::setw(16) << t.conv_flops.str() << "  ("
     << scaled(t.conv_flops, 7) << "e7)\n";
  os << "BN FLOPs        " << std::setw(16) << t.bn_flops.str() << "  ("
     << scaled(t.bn_flops, 7) << "e7)\n";
  os << "Bconv BOPs      " << std::setw(16) << t.bops << "  ("
     << scaled(Rational(t.bops), 9) << "e9)\n";
  os << "OPs-without-BN  " << std::setw(16) << t.ops_without_bn().str() << "  ("
     << scaled(t.ops_without_bn(), 8) << "e8)\n";
  os << "OPs-with-BN     " << std::setw(16) << t.ops_with_bn().str() << "  ("
     << scaled(t.ops_with_bn(), 8) << "e8)\n";
  os << "elementwise     " << std::setw(16) << t.elementwise_flops.str() << '\n';
  os << "params          " << std::setw(16) << t.params << '\n';
  os << "repeat elements " << std::setw(16) << t.repeat_elements << '\n';
  os << "total OPs       " << std::setw(16)
     << (with_bn ? t.ops_with_bn() : t.ops_without_bn()).str() << '\n';
  return os.str();
}

std::string render_tsv(const CostReport& r, bool with_bn) {
  std::ostringstream os;
  os << "node_id\tkind\tflops\tbops\tparams\n";
  for (const auto& c : r.per_node) {
    os << c.id << '\t' << kind_name(c.kind) << '\t' << c.flops.str() << '\t'
       << c.bops << '\t' << c.params << '\n';
  }
  totals_rows(os, r.totals, with_bn, "\t");
  return os.str();
}

std::string render_delta(const CostDelta& d) {
  std::ostringstream os;
  os << "delta\tfc_flops\t" << d.fc_flops.str() << "\t(" << scaled(d.fc_flops, 7) << "e7)\n";
  os << "delta\tconv_flops\t" << d.conv_flops.str() << '\n';
  os << "delta\tbn_flops\t" << d.bn_flops.str() << "\t(" << scaled(d.bn_flops, 7) << "e7)\n";
  os << "delta\tbconv_bops\t" << d.bops << '\n';
  os << "delta\tparams\t" << d.params << '\n';
  os << "delta\tops_without_bn\t" << d.ops_without_bn.str() << "\t("
     << scaled(d.ops_without_bn, 8) << "e8)\n";
  os << "delta\tops_with_bn\t" << d.ops_with_bn.str() << "\t("
     << scaled(d.ops_with_bn, 8) << "e8)\n";
  return os.str();
}

}  // namespace repbnn
