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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "repbnn/builders.h"
#include "repbnn/dataset.h"
#include "repbnn/error.h"
#include "repbnn/network.h"
#include "repbnn/reptran.h"
#include "repbnn/trainer.h"

namespace repbnn {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no repbnn::Error thrown";
  return ErrorCode::kInvalidArgument;
}

// Every differentiable node kind in one small float graph.
constexpr const char* kMixed = R"(name=mixed
input: Input(c=2, h=6, w=6)
c1: Conv(c_in=2, c_out=4, kh=3, kw=3, stride=1, pad=1) <- input
bn1: BatchNorm(channels=4, share=1) <- c1
act: PReLUShifted(channels=4) <- bn1
mp: MaxPool(k=2, stride=2) <- act
rep: Repeat(times=2) <- mp
c2: Conv(c_in=8, c_out=4, kh=3, kw=3, stride=2, pad=1) <- rep
pad: ChannelPad(before=2, after=2) <- c2
relu: ReLU() <- pad
c3: Conv(c_in=8, c_out=8, kh=1, kw=1, stride=2, pad=0) <- rep
sum: Add() <- relu, c3
ap: AvgPool(k=2, stride=2) <- sum
flatten: Flatten() <- ap
fc: FC(in=8, out=3, take=6) <- flatten
)";

Activation random_activation(const Dims& d, std::uint64_t seed, float scale = 1.0F) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0F, scale);
  Activation a{d, std::vector<float>(d.numel())};
  for (float& v : a.data) v = dist(rng);
  return a;
}

double weighted_output(Network& net, const ParamStore& p, const Activation& x,
                       const Activation& r) {
  const Activation& y = net.forward(p, x, true);
  double s = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) s += static_cast<double>(y.data[i]) * r.data[i];
  return s;
}

void perturb_params(ParamStore& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0F, 0.3F);
  for (auto& [key, param] : p) {
    if (!param.trainable) continue;
    for (float& v : param.value) v += dist(rng);
  }
}

TEST(Network, GradientsMatchFiniteDifferences) {
  const Graph g = parse_model(kMixed);
  Network net(g);
  ParamStore p = init_params(g, 3, 0.0F);
  perturb_params(p, 4);
  const Activation x = random_activation({3, 2, 6, 6}, 5);
  const Dims od = infer_shapes(g, x.dims).at("fc");
  const Activation r = random_activation(od, 6);

  weighted_output(net, p, x, r);
  const GradStore grads = net.backward(p, r);
  std::mt19937_64 pick(7);
  std::size_t checked = 0;
  for (const auto& [key, grad] : grads) {
    for (int k = 0; k < 4; ++k) {
      const std::size_t i = pick() % grad.size();
      ParamStore plus = p;
      ParamStore minus = p;
      const float h = 1e-2F;
      plus.at(key).value[i] += h;
      minus.at(key).value[i] -= h;
      const double fd =
          (weighted_output(net, plus, x, r) - weighted_output(net, minus, x, r)) / (2.0 * h);
      EXPECT_NEAR(grad[i], fd, 2e-2 * std::max(1.0, std::fabs(fd))) << key << "[" << i << "]";
      ++checked;
    }
  }
  EXPECT_GE(checked, 40U);
}

TEST(Network, BinaryConvUsesSignAndClipsLatentGradient) {
  ToyNetOptions o;
  o.blocks = 1;
  const Graph g = build_toy_net(o);
  ParamStore p = init_params(g, 1, 0.0F);
  p.at("l1.weight").value[0] = 1.5F;
  p.at("l1.weight").value[1] = -0.25F;

  Graph dense_graph;
  for (const Node& n : g.nodes()) {
    Node copy = n;
    if (n.kind == NodeKind::kBconv) {
      ConvSpec spec = n.conv();
      spec.binary = false;
      copy.kind = NodeKind::kConv;
      copy.attrs = spec;
    }
    dense_graph.add(copy);
  }
  ParamStore signed_p = p;
  for (float& v : signed_p.at("l1.weight").value) v = v >= 0.0F ? 1.0F : -1.0F;

  const Activation x = random_activation({4, 3, 8, 8}, 2);
  Network a(g);
  Network b(dense_graph);
  const Activation& ya = a.forward(p, x, true);
  const Activation& yb = b.forward(signed_p, x, true);
  ASSERT_EQ(ya.data, yb.data);
  const Activation r = random_activation(ya.dims, 9);
  const GradStore ga = a.backward(p, r);
  const GradStore gb = b.backward(signed_p, r);
  const auto& latent = p.at("l1.weight").value;
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const float expected = std::fabs(latent[i]) <= 1.0F ? gb.at("l1.weight")[i] : 0.0F;
    ASSERT_EQ(ga.at("l1.weight")[i], expected) << i;
  }
  EXPECT_EQ(ga.at("l1.weight")[0], 0.0F);
}

TEST(Network, ThreadCountDoesNotChangeResults) {
  const Graph g = reptran(build_toy_net({}), {});
  const ParamStore p = init_params(g, 8, 0.01F);
  const Activation x = random_activation({4, 3, 8, 8}, 1);
  Network a(g);
  Network b(g);
  const Activation ya = a.forward(p, x, true, 1);
  const Activation yb = b.forward(p, x, true, 4);
  ASSERT_EQ(ya.data, yb.data);
  const Activation r = random_activation(ya.dims, 2);
  EXPECT_EQ(a.backward(p, r, 1), b.backward(p, r, 4));
}

TEST(Ste, MatchesFiniteDifferencesOfHardtanh) {
  for (double x = -2.0; x <= 2.0; x += 0.0625) {
    if (std::fabs(std::fabs(x) - 1.0) < 1e-3) continue;
    const double h = 1e-6;
    const double fd = (hardtanh(x + h) - hardtanh(x - h)) / (2.0 * h);
    EXPECT_NEAR(ste_sign_grad(x), fd, 1e-6) << x;
  }
}

TEST(Ste, SignNodeBackwardIsTheClippedEstimator) {
  Graph g;
  g.add("input", NodeKind::kInput, InputAttrs{1, 1, 8});
  g.add("sign", NodeKind::kSign, NoAttrs{}, {"input"});
  const std::vector<float> xs{-2.0F, -1.0F, -0.5F, 0.0F, 0.25F, 0.999F, 1.0F, 1.5F};
  Network net(g);
  const Activation x{{1, 1, 1, 8}, xs};
  const Activation& y = net.forward({}, x, true);
  EXPECT_EQ(y.data, (std::vector<float>{-1, -1, -1, 1, 1, 1, 1, 1}));
  Activation dx;
  net.backward({}, Activation{y.dims, std::vector<float>(8, 1.0F)}, 1, &dx);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(dx.data[i], static_cast<float>(ste_sign_grad(xs[i]))) << xs[i];
  }
}

TEST(BatchNorm, EvalMatchesTrainWithMomentumOne) {
  ToyNetOptions o;
  o.binary = false;
  const Graph g = build_toy_net(o);
  TrainConfig cfg;
  cfg.learning_rate = 0.0F;
  cfg.weight_decay = 0.0F;
  cfg.bn_momentum = 1.0F;
  Trainer t(g, init_params(g, 2, 0.01F), cfg);
  const Activation x = random_activation({16, 3, 8, 8}, 3);
  std::vector<std::uint8_t> labels(16, 0);
  Network probe(g);
  const Activation train_out = probe.forward(t.params(), x, true);
  t.step(x, labels);
  const Activation eval_out = probe.forward(t.params(), x, false);
  ASSERT_EQ(train_out.data.size(), eval_out.data.size());
  for (std::size_t i = 0; i < train_out.data.size(); ++i) {
    EXPECT_NEAR(train_out.data[i], eval_out.data[i], 1e-5);
  }
}

TEST(Loss, SoftmaxCrossEntropy) {
  const Activation uniform{{2, 4, 1, 1}, std::vector<float>(8, 0.5F)};
  const LossAndGrad u = softmax_cross_entropy(uniform, {0, 3});
  EXPECT_NEAR(u.loss, std::log(4.0), 1e-9);
  EXPECT_NEAR(u.grad.data[0], (0.25 - 1.0) / 2.0, 1e-7);
  EXPECT_NEAR(u.grad.data[1], 0.25 / 2.0, 1e-7);

  const Activation sharp{{1, 2, 1, 1}, {1000.0F, 0.0F}};
  EXPECT_NEAR(softmax_cross_entropy(sharp, {0}).loss, 0.0, 1e-9);
  EXPECT_NEAR(softmax_cross_entropy(sharp, {1}).loss, 1000.0, 1e-6);
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 32;
  cfg.seed = 5;
  return cfg;
}

Dataset blobs() { return make_blobs(192, 2, {1, 3, 8, 8}, 17); }

TEST(Trainer, DeterministicPerSeed) {
  const Graph g = build_toy_net({});
  TrainConfig cfg = quick_config();
  cfg.epochs = 3;
  const TrainResult a = train(g, blobs(), cfg);
  const TrainResult b = train(g, blobs(), cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].eval_acc, b.history[i].eval_acc);
  }
  for (const auto& [key, p] : a.params) EXPECT_EQ(p.value, b.params.at(key).value) << key;

  cfg.threads = 3;
  const TrainResult c = train(g, blobs(), cfg);
  for (const auto& [key, p] : a.params) EXPECT_EQ(p.value, c.params.at(key).value) << key;

  cfg.threads = 1;
  cfg.seed = 6;
  EXPECT_NE(train(g, blobs(), cfg).history[0].train_loss, a.history[0].train_loss);
}

TEST(Trainer, LossDescendsOnBlobs) {
  const TrainResult r = train(build_toy_net({}), blobs(), quick_config());
  ASSERT_EQ(r.history.size(), 6U);
  for (std::size_t i = 1; i < 5; ++i) {
    EXPECT_LT(r.history[i].train_loss, r.history[i - 1].train_loss) << "epoch " << i + 1;
  }
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  EXPECT_GT(r.history.back().eval_acc, 0.8);
}

TEST(Trainer, RepNetTrainsAndKeepsAccuracy) {
  const Graph base = build_toy_net({});
  const Graph rep = reptran(base, {});
  const TrainResult a = train(base, blobs(), quick_config());
  const TrainResult b = train(rep, blobs(), quick_config());
  EXPECT_GE(b.history.back().eval_acc, a.history.back().eval_acc - 0.05);
}

TEST(Trainer, MaxStepsStopsEarly) {
  TrainConfig cfg = quick_config();
  cfg.max_steps = 7;
  const TrainResult r = train(build_toy_net({}), blobs(), cfg);
  EXPECT_EQ(r.steps, 7U);
}

TEST(Trainer, Errors) {
  const Graph g = build_toy_net({});
  ParamStore p = init_params(g, 1, 0.0F);
  p.at("fc.bias").value[0] = std::nanf("");
  EXPECT_EQ(code_of([&] { train(g, blobs(), quick_config(), p); }), ErrorCode::kDivergedLoss);
  EXPECT_EQ(code_of([&] { train(g, make_blobs(10, 2, {1, 3, 4, 4}, 1), quick_config()); }),
            ErrorCode::kDatasetError);
  EXPECT_EQ(code_of([&] { train(g, make_blobs(10, 5, {1, 3, 8, 8}, 1), quick_config()); }),
            ErrorCode::kDatasetError);
}

Graph rep_toy(BnPosition pos, bool residual) {
  ToyNetOptions o;
  o.residual = residual;
  RepTranConfig cfg;
  cfg.bn_position = pos;
  return reptran(build_toy_net(o), cfg);
}

TEST(Diversity, SymmetricInitGivesZeroDistances) {
  const Graph g = rep_toy(BnPosition::kAfterRepeat, true);
  const ParamStore p = init_params(g, 4, 0.0F);
  const DiversityReport r = channel_diversity(g, p, random_activation({4, 3, 8, 8}, 1));
  ASSERT_EQ(r.layers.size(), 2U);
  for (const auto& l : r.layers) {
    EXPECT_EQ(l.blocks, 4U);
    EXPECT_EQ(l.post_repeat, 0.0);
    EXPECT_EQ(l.post_bn, 0.0);
    ASSERT_TRUE(l.post_residual.has_value());
  }
}

TEST(Diversity, RequiresRepGraph) {
  const Graph g = build_toy_net({});
  EXPECT_EQ(code_of([&] {
              channel_diversity(g, init_params(g, 1, 0.0F), random_activation({1, 3, 8, 8}, 1));
            }),
            ErrorCode::kNotRepGraph);
}

TEST(Diversity, BeforeRepeatWithoutResidualStaysSymmetric) {
  const Graph g = rep_toy(BnPosition::kBeforeRepeat, false);
  TrainConfig cfg = quick_config();
  cfg.max_steps = 10;
  cfg.bn_init_noise = 0.05F;
  const TrainResult r = train(g, blobs(), cfg);
  ASSERT_EQ(r.steps, 10U);
  const Activation probe = random_activation({8, 3, 8, 8}, 2);
  Network net(g);
  net.forward(r.params, probe, false);
  for (const Node& n : g.nodes()) {
    if (n.kind != NodeKind::kRepeat) continue;
    EXPECT_EQ(block_distance(net.activation(n.id), n.as<RepeatAttrs>().times), 0.0) << n.id;
  }
  for (const auto& l : channel_diversity(g, r.params, probe).layers) {
    EXPECT_EQ(l.post_bn, 0.0) << l.layer;
  }
}

TEST(Diversity, AfterRepeatWithNoiseBreaksSymmetry) {
  const Graph g = rep_toy(BnPosition::kAfterRepeat, true);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;
  const TrainResult r = train(g, blobs(), cfg);
  for (const auto& l : channel_diversity(g, r.params, random_activation({8, 3, 8, 8}, 2)).layers) {
    EXPECT_EQ(l.post_repeat, 0.0) << l.layer;
    EXPECT_GT(l.post_bn, 0.0) << l.layer;
  }
}

TEST(DumpFeatures, WritesStageBlobs) {
  const Graph g = rep_toy(BnPosition::kAfterRepeat, true);
  const ParamStore p = init_params(g, 1, 0.01F);
  const auto dir = std::filesystem::temp_directory_path() / "repbnn_dump_test";
  std::filesystem::remove_all(dir);
  const auto paths =
      dump_features(g, p, random_activation({1, 3, 8, 8}, 1), "l1", dir.string());
  ASSERT_EQ(paths.size(), 3U);
  for (const auto& path : paths) {
    const DenseTensor t = load_dense_blob(path);
    EXPECT_EQ(t.dims(), (Dims{1, 32, 8, 8})) << path;
  }
  EXPECT_EQ(code_of([&] {
              dump_features(g, p, random_activation({1, 3, 8, 8}, 1), "nope", dir.string());
            }),
            ErrorCode::kUnknownLayer);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, BlobsAreDeterministicAndBalanced) {
  const Dataset a = make_blobs(50, 5, {1, 2, 6, 6}, 3);
  const Dataset b = make_blobs(50, 5, {1, 2, 6, 6}, 3);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), 4), 10);
  EXPECT_EQ(a.batch({0, 3}).dims, (Dims{2, 2, 6, 6}));
}

TEST(Dataset, LabelledBytesRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "repbnn_bytes_test.bin";
  Dataset d = make_blobs(6, 3, {1, 3, 2, 2}, 1);
  for (float& v : d.images) v = std::clamp(std::round(v * 10.0F) / 10.0F, -1.0F, 1.0F);
  save_labelled_bytes(path.string(), d);
  EXPECT_EQ(std::filesystem::file_size(path), 6U * 13U);
  const Dataset back = load_labelled_bytes(path.string(), {1, 3, 2, 2}, 3);
  EXPECT_EQ(back.labels, d.labels);
  for (std::size_t i = 0; i < d.images.size(); ++i) EXPECT_NEAR(back.images[i], d.images[i], 1e-2);
  EXPECT_EQ(code_of([&] { load_labelled_bytes(path.string(), {1, 3, 3, 3}, 3); }),
            ErrorCode::kDatasetError);
  EXPECT_EQ(code_of([&] { load_labelled_bytes(path.string(), {1, 3, 2, 2}, 2); }),
            ErrorCode::kDatasetError);
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([&] { load_dataset("blobs:x", {1, 3, 2, 2}, 2, 1); }),
            ErrorCode::kDatasetError);
  EXPECT_EQ(load_dataset("blobs:12", {1, 3, 2, 2}, 2, 1).size(), 12U);
}

TEST(Checkpoint, RoundTrip) {
  const Graph g = reptran(build_toy_net({}), {});
  const ParamStore p = init_params(g, 9, 0.01F);
  const auto path = std::filesystem::temp_directory_path() / "repbnn_ckpt_test.bin";
  save_params(path.string(), p);
  const ParamStore back = load_params(path.string());
  ASSERT_EQ(back.size(), p.size());
  for (const auto& [key, param] : p) {
    EXPECT_EQ(back.at(key).value, param.value) << key;
    EXPECT_EQ(back.at(key).dims, param.dims) << key;
    EXPECT_EQ(back.at(key).trainable, param.trainable) << key;
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace repbnn
