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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "repbnn/builders.h"
#include "repbnn/conv.h"
#include "repbnn/cost_model.h"
#include "repbnn/dataset.h"
#include "repbnn/network.h"
#include "repbnn/reptran.h"
#include "repbnn/trainer.h"

namespace repbnn {
namespace {

// Collects failures of one criterion; the first few are echoed.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 5) std::printf("    failed: %s\n", what.c_str());
  }
  void note(const std::string& text) { std::printf("    %s\n", text.c_str()); }
  bool ok() const { return failures_ == 0; }

 private:
  int failures_ = 0;
};

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void near_rel(Check& c, const std::string& cell, const Rational& got, double reference,
              double tol) {
  const double rel = std::fabs(got.to_double() - reference) / reference;
  c.note(cell + fmt(": %.6g vs reference %.4g (%+.2f%%)", got.to_double(), reference,
                    100.0 * (got.to_double() - reference) / reference));
  c.expect(rel <= tol, cell + " outside tolerance");
}

Graph rep(const Graph& g, std::size_t beta, LastLayerPolicy p = LastLayerPolicy::kTakeAll,
          BnPosition pos = BnPosition::kAfterRepeat) {
  RepTranConfig cfg;
  cfg.beta = beta;
  cfg.last_layer = p;
  cfg.bn_position = pos;
  return reptran(g, cfg);
}

void reactnet_costs(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Graph base = build_reactnet_a();
  const CostReport a = count(base, Dims{1, 3, 224, 224});
  const CostReport b = count(rep(base, 2), Dims{1, 3, 224, 224});
  const double tol = 0.015;
  near_rel(c, "FC", a.totals.fc_flops, 0.102e7, tol);
  near_rel(c, "Conv", a.totals.conv_flops, 1.084e7, tol);
  near_rel(c, "BN", a.totals.bn_flops, 1.009e7, tol);
  near_rel(c, "Bconv BOPs", Rational(a.totals.bops), 4.822e9, tol);
  near_rel(c, "OPs-without-BN", a.totals.ops_without_bn(), 0.872e8, tol);
  near_rel(c, "Rep FC", b.totals.fc_flops, 0.205e7, tol);
  near_rel(c, "Rep BN", b.totals.bn_flops, 1.261e7, tol);
  near_rel(c, "Rep OPs-without-BN", b.totals.ops_without_bn(), 0.882e8, tol);
  near_rel(c, "Rep OPs-with-BN", b.totals.ops_with_bn(), 1.008e8, tol);
  const CostDelta d = diff(a, b);
  near_rel(c, "delta BN", d.bn_flops, 0.252e7, tol);
  near_rel(c, "delta OPs-with-BN", d.ops_with_bn, 0.035e8, tol);
  const double s = elapsed_since(t0);
  c.expect(s < 1.0, "runtime " + std::to_string(s) + " s");
}

void resnet_last_layer(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Graph base = build_resnet20(true);
  const Rational raw = count(base).totals.ops_without_bn();
  c.expect(raw == Rational(1069696), "raw total " + raw.str());
  const std::pair<LastLayerPolicy, std::int64_t> expected[] = {
      {LastLayerPolicy::kTakeAll, 640},
      {LastLayerPolicy::kTakeOneOverBeta, 0},
      {LastLayerPolicy::kTakeOneOverBetaSquared, -320}};
  int solution = 1;
  for (const auto& [policy, delta] : expected) {
    const Rational got = count(rep(base, 2, policy)).totals.ops_without_bn() - raw;
    c.note("solution " + std::to_string(solution) + ": " + got.str() + " OPs");
    c.expect(got == Rational(delta), "solution " + std::to_string(solution));
    ++solution;
  }
  c.expect(elapsed_since(t0) < 1.0, "runtime");
}

void bn_factor(Check& c) {
  for (std::size_t beta : {1U, 2U, 4U, 8U}) {
    const auto b = static_cast<std::int64_t>(beta);
    c.expect(bn_cost_factor(beta) == Rational(1, 2 * b) + Rational(b, 2),
             "factor at beta " + std::to_string(beta));
  }
  ToyNetOptions plain;
  plain.residual = false;
  const std::vector<Graph> graphs{build_resnet20(true), build_resnet20(false),
                                  build_resnet20(true, ResNetShortcut::kPoolConv),
                                  build_reactnet_a(), build_toy_net({}), build_toy_net(plain)};
  for (const Graph& g : graphs) {
    const Rational before = count(g).totals.bn_flops;
    for (std::size_t beta : {1U, 2U, 4U, 8U}) {
      RepTranConfig cfg;
      cfg.beta = beta;
      const Graph t = apply_reptran_rules(g, cfg);
      c.expect(count(t).totals.bn_flops == before * bn_cost_factor(beta),
               g.name + " at beta " + std::to_string(beta));
    }
  }
}

void xnor(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution coin(0.5);
  auto signs = [&](const Dims& d) {
    std::vector<float> v(d.numel());
    for (float& x : v) x = coin(rng) ? 1.0F : -1.0F;
    return DenseTensor(d, std::move(v));
  };
  int cases = 0;
  for (std::size_t stride : {1U, 2U}) {
    for (std::size_t pad : {0U, 1U}) {
      for (int i = 0; i < 256; ++i) {
        const std::size_t k = 1 + rng() % 3;
        const ConvSpec spec{1 + rng() % 130, 1 + rng() % 8, k, k, stride, pad, 1, true};
        const Dims xd{1 + rng() % 3, spec.c_in, k + rng() % 7, k + rng() % 7};
        const DenseTensor x = signs(xd);
        const DenseTensor w = signs(spec.kernel_dims());
        const DenseTensor fast = conv2d_xnor(sign_binarize(x), sign_binarize(w), spec);
        c.expect(fast == conv2d_dense(x, w, spec),
                 "case " + std::to_string(cases) + " c_in " + std::to_string(spec.c_in));
        ++cases;
      }
    }
  }
  const double s = elapsed_since(t0);
  c.note(std::to_string(cases) + " cases in " + fmt("%.2f s", s));
  c.expect(cases >= 1000 && s < 30.0, "case count or runtime");
}

// Tied weights: W0[o][c] = sum_j W1[o mod (C_out/beta)][j*C_in + c] makes the
// baseline compute exactly what each replicated block computes.
void tied_weights(Check& c, std::size_t beta) {
  ToyNetOptions o;
  o.binary = false;
  o.residual = false;
  o.width = 8;
  o.blocks = 3;
  const Graph g0 = build_toy_net(o);
  const Graph g1 = rep(g0, beta);
  const ParamStore p1 = init_params(g1, 31, 0.0F);
  ParamStore p0 = init_params(g0, 32, 0.0F);
  p0.at("stem.weight") = p1.at("stem.weight");
  for (const Node& n : g0.nodes()) {
    if (n.kind != NodeKind::kConv || n.id == "stem") continue;
    const ConvSpec s = n.conv();
    const std::size_t taps = s.kh * s.kw;
    const std::size_t groups = s.c_out / beta;
    const auto& w1 = p1.at(param_key(n.id, "weight")).value;
    auto& w0 = p0.at(param_key(n.id, "weight")).value;
    for (std::size_t out = 0; out < s.c_out; ++out)
      for (std::size_t ch = 0; ch < s.c_in; ++ch)
        for (std::size_t t = 0; t < taps; ++t) {
          float sum = 0.0F;
          for (std::size_t j = 0; j < beta; ++j) {
            sum += w1[((out % groups) * s.c_in * beta + j * s.c_in + ch) * taps + t];
          }
          w0[(out * s.c_in + ch) * taps + t] = sum;
        }
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<float> dist;
  Activation x{{4, 3, 8, 8}, std::vector<float>(4 * 3 * 64)};
  for (float& v : x.data) v = dist(rng);
  Network n0(g0);
  Network n1(g1);
  n0.forward(p0, x, false);
  n1.forward(p1, x, false);
  std::size_t compared = 0;
  for (const Node& n : g0.nodes()) {
    if (n.kind == NodeKind::kInput || n.kind == NodeKind::kFC) continue;
    const Activation& a0 = n0.activation(n.id);
    const Activation& a1 = n1.activation(counterpart(g1, n.id));
    const DenseTensor expected = repeat_channels(DenseTensor(a0.dims, a0.data), beta);
    bool same = expected.dims() == a1.dims;
    double scale = 1.0;
    for (float v : a0.data) scale = std::max(scale, static_cast<double>(std::fabs(v)));
    for (std::size_t i = 0; same && i < a1.data.size(); ++i) {
      same = std::fabs(expected.data()[i] - a1.data[i]) <= 1e-5 * scale;
    }
    c.expect(same, "tied activation " + n.id + " at beta " + std::to_string(beta));
    ++compared;
  }
  c.expect(compared >= 8, "too few activations compared");
}

void invariance(Check& c) {
  ToyNetOptions plain;
  plain.residual = false;
  const std::vector<Graph> graphs{build_resnet20(true), build_resnet20(false),
                                  build_resnet20(true, ResNetShortcut::kPoolConv),
                                  build_reactnet_a(), build_toy_net({}), build_toy_net(plain)};
  for (const Graph& g : graphs) {
    for (std::size_t beta : {2U, 4U, 8U}) {
      for (auto pos : {BnPosition::kAfterRepeat, BnPosition::kBeforeRepeat}) {
        RepTranConfig cfg;
        cfg.beta = beta;
        cfg.bn_position = pos;
        const std::string tag = g.name + " beta " + std::to_string(beta);
        try {
          const Graph t = reptran(g, cfg);
          verify_transform(g, t, cfg);
          const CostTotals a = count(g).totals;
          const CostTotals b = count(t).totals;
          std::int64_t conv_params_a = 0;
          std::int64_t conv_params_b = 0;
          for (const NodeCost& n : count(g).per_node) {
            if (is_conv_kind(n.kind)) conv_params_a += n.params;
          }
          for (const NodeCost& n : count(t).per_node) {
            if (is_conv_kind(n.kind)) conv_params_b += n.params;
          }
          c.expect(conv_params_a == conv_params_b, tag + " conv params");
          c.expect(a.conv_flops == b.conv_flops && a.bops == b.bops, tag + " MACs/BOPs");
        } catch (const std::exception& e) {
          c.expect(false, tag + ": " + e.what());
        }
      }
    }
  }
  for (std::size_t beta : {2U, 4U, 8U}) tied_weights(c, beta);
}

void quantization(Check& c) {
  for (std::size_t c_in = 1; c_in <= 8; ++c_in) {
    const ConvSpec spec{c_in, 1, 1, 1, 1, 0, 1, true};
    std::set<long> values;
    bool parity = true;
    const std::size_t combos = std::size_t{1} << c_in;
    for (std::size_t xm = 0; xm < combos; ++xm) {
      for (std::size_t wm = 0; wm < combos; ++wm) {
        BitTensorBuilder xb({1, c_in, 1, 1});
        BitTensorBuilder wb({1, c_in, 1, 1});
        for (std::size_t i = 0; i < c_in; ++i) {
          xb.set(0, i, (xm >> i) & 1U);
          wb.set(0, i, (wm >> i) & 1U);
        }
        const auto v = static_cast<long>(
            conv2d_xnor(std::move(xb).build(), std::move(wb).build(), spec).data()[0]);
        values.insert(v);
        parity = parity && (v - static_cast<long>(c_in)) % 2 == 0;
      }
    }
    c.expect(values.size() == c_in + 1, "c_in " + std::to_string(c_in) + " gives " +
                                            std::to_string(values.size()) + " levels");
    c.expect(parity, "parity at c_in " + std::to_string(c_in));
    c.expect(quantization_levels(spec) == c_in + 1, "formula at c_in " + std::to_string(c_in));
  }
  c.expect(quantization_levels({16, 16, 3, 3, 1, 1, 1, true}) == 145, "formula 16x3x3");
  c.expect(quantization_levels({64, 32, 3, 3, 2, 1, 1, true}) == 577, "formula 64x3x3");
}

Activation probe_batch() {
  const Dataset d = make_blobs(16, 2, {1, 3, 8, 8}, 99);
  std::vector<std::size_t> idx(16);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return d.batch(idx);
}

void symmetry(Check& c) {
  const Dataset data = make_blobs(192, 2, {1, 3, 8, 8}, 17);
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.bn_init_noise = 0.05F;

  ToyNetOptions plain;
  plain.residual = false;
  const Graph before = rep(build_toy_net(plain), 2, LastLayerPolicy::kTakeAll,
                           BnPosition::kBeforeRepeat);
  cfg.max_steps = 10;
  const TrainResult a = train(before, data, cfg);
  c.expect(a.steps == 10, "expected 10 steps");
  Network net(before);
  net.forward(a.params, probe_batch(), false);
  for (const Node& n : before.nodes()) {
    if (n.kind != NodeKind::kRepeat) continue;
    const double d = block_distance(net.activation(n.id), n.as<RepeatAttrs>().times);
    c.note("(a) before-repeat " + n.id + fmt(" distance %.3g", d));
    c.expect(d == 0.0, "(a) " + n.id + " blocks differ");
  }

  const Graph after = rep(build_toy_net({}), 2);
  cfg.max_steps = 0;
  cfg.epochs = 3;
  const TrainResult b = train(after, data, cfg);
  for (const auto& l : channel_diversity(after, b.params, probe_batch()).layers) {
    c.note("(b) after-repeat " + l.layer +
           fmt(" post-repeat %.3g post-BN %.4g post-residual %.4g", l.post_repeat, l.post_bn,
               l.post_residual.value_or(-1.0)));
    c.expect(l.post_repeat == 0.0, "(b) " + l.layer + " post-repeat distance not 0");
    c.expect(l.post_bn > 0.0, "(b) " + l.layer + " post-BN distance is 0");
  }
}

void trainer_sanity(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = make_blobs(256, 2, {1, 3, 8, 8}, 3);
  const Graph g = build_toy_net({});
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 11;
  const TrainResult a = train(g, data, cfg);
  const TrainResult b = train(g, data, cfg);
  bool identical = a.history.size() == b.history.size();
  for (std::size_t i = 0; identical && i < a.history.size(); ++i) {
    identical = a.history[i].train_loss == b.history[i].train_loss;
  }
  for (const auto& [key, p] : a.params) identical = identical && p.value == b.params.at(key).value;
  c.expect(identical, "runs with the same seed differ");
  std::string curve = "loss";
  for (const auto& m : a.history) curve += fmt(" %.4f", m.train_loss);
  c.note(curve);
  c.expect(a.history.size() == 5, "expected 5 epochs");
  for (std::size_t i = 1; i < a.history.size(); ++i) {
    c.expect(a.history[i].train_loss < a.history[i - 1].train_loss,
             "loss did not decrease at epoch " + std::to_string(i + 1));
  }
  double worst = 0.0;
  for (double x = -3.0; x <= 3.0; x += 0.01) {
    if (std::fabs(std::fabs(x) - 1.0) < 1e-4) continue;
    const double h = 1e-7;
    const double fd = (hardtanh(x + h) - hardtanh(x - h)) / (2.0 * h);
    worst = std::max(worst, std::fabs(fd - ste_sign_grad(x)));
  }
  c.note(fmt("max |STE - finite difference| = %.2g", worst));
  c.expect(worst <= 1e-6, "STE mismatch");
  c.expect(elapsed_since(t0) < 120.0, "runtime");
}

}  // namespace
}  // namespace repbnn

int main() {
  using repbnn::Check;
  const std::vector<std::pair<const char*, std::function<void(Check&)>>> criteria{
      {"1 cost model reproduces the ReActNet-A table within 1.5%", repbnn::reactnet_costs},
      {"2 ResNet-20 last-layer deltas exact, raw 1069696", repbnn::resnet_last_layer},
      {"3 BatchNorm cost factor 1/(2b)+b/2", repbnn::bn_factor},
      {"4 XNOR/popcount conv equals dense conv", repbnn::xnor},
      {"5 RepTran invariance and tied-weight equivalence", repbnn::invariance},
      {"6 binary conv quantization levels", repbnn::quantization},
      {"7 replicated-channel symmetry mechanics", repbnn::symmetry},
      {"8 trainer determinism, descent and STE", repbnn::trainer_sanity},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double s = repbnn::elapsed_since(t0);
    std::printf("%s criterion %s (%.2f s)\n", c.ok() ? "PASS" : "FAIL", name, s);
    std::fflush(stdout);
    failed += c.ok() ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
