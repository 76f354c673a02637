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

#include "repbnn/builders.h"

#include <array>
#include <string>

namespace repbnn {

namespace {

ConvSpec conv3x3(std::size_t c_in, std::size_t c_out, std::size_t stride,
                 bool binary) {
  return ConvSpec{c_in, c_out, 3, 3, stride, 1, 1, binary};
}

ConvSpec conv1x1(std::size_t c_in, std::size_t c_out, bool binary) {
  return ConvSpec{c_in, c_out, 1, 1, 1, 0, 1, binary};
}

std::string add_head(Graph& g, const std::string& x, std::size_t features,
                     std::size_t classes) {
  const auto pool = g.add("pool", NodeKind::kAvgPool, PoolAttrs{1, 1, true}, {x});
  const auto flat = g.add("flatten", NodeKind::kFlatten, NoAttrs{}, {pool});
  const auto fc = g.add("fc", NodeKind::kFC, FCAttrs{features, classes, features}, {flat});
  g.outputs = {fc};
  return fc;
}

std::string resnet_downsample(Graph& g, const std::string& prefix,
                              const std::string& x, std::size_t c_in,
                              std::size_t c_out, ResNetShortcut shortcut) {
  if (shortcut == ResNetShortcut::kZeroPad) {
    const auto sub = g.add(prefix + ".down_pool", NodeKind::kAvgPool,
                           PoolAttrs{1, 2, false}, {x});
    const std::size_t extra = c_out - c_in;
    return g.add(prefix + ".down_pad", NodeKind::kChannelPad,
                 ChannelPadAttrs{extra / 2, extra - extra / 2}, {sub});
  }
  const auto pool = g.add(prefix + ".down_pool", NodeKind::kAvgPool,
                          PoolAttrs{2, 2, false}, {x});
  const auto conv = g.add(prefix + ".down_conv", NodeKind::kConv,
                          conv1x1(c_in, c_out, false), {pool});
  return g.add(prefix + ".down_bn", NodeKind::kBatchNorm,
               BatchNormAttrs{c_out, 1}, {conv});
}

}  // namespace

Graph build_resnet20(bool binary, ResNetShortcut shortcut) {
  Graph g;
  g.name = binary ? "resnet20-binary" : "resnet20";
  std::string x = g.add("input", NodeKind::kInput, InputAttrs{3, 32, 32});
  x = g.add("stem", NodeKind::kConv, conv3x3(3, 16, 1, false), {x});
  x = g.add("stem_bn", NodeKind::kBatchNorm, BatchNormAttrs{16, 1}, {x});
  if (!binary) x = g.add("stem_relu", NodeKind::kReLU, NoAttrs{}, {x});

  std::size_t c = 16;
  constexpr std::array<std::size_t, 3> kWidths{16, 32, 64};
  for (std::size_t s = 0; s < kWidths.size(); ++s) {
    for (std::size_t b = 0; b < 3; ++b) {
      const std::string block = "s" + std::to_string(s + 1) + ".b" + std::to_string(b);
      const std::size_t c_out = kWidths[s];
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      const std::string block_in = x;
      const std::string bypass =
          stride == 1 && c == c_out
              ? block_in
              : resnet_downsample(g, block, block_in, c, c_out, shortcut);
      if (binary) {
        // Bypass around each conv layer.
        for (std::size_t l = 1; l <= 2; ++l) {
          const std::string p = block + ".c" + std::to_string(l);
          const std::size_t layer_in_c = l == 1 ? c : c_out;
          const std::size_t layer_stride = l == 1 ? stride : 1;
          const std::string layer_in = x;
          x = g.add(p + ".sign", NodeKind::kSign, NoAttrs{}, {x});
          x = g.add(p, NodeKind::kBconv, conv3x3(layer_in_c, c_out, layer_stride, true), {x});
          x = g.add(p + ".bn", NodeKind::kBatchNorm, BatchNormAttrs{c_out, 1}, {x});
          x = g.add(p + ".add", NodeKind::kAdd, NoAttrs{},
                    {x, l == 1 ? bypass : layer_in});
        }
      } else {
        x = g.add(block + ".c1", NodeKind::kConv, conv3x3(c, c_out, stride, false), {x});
        x = g.add(block + ".c1.bn", NodeKind::kBatchNorm, BatchNormAttrs{c_out, 1}, {x});
        x = g.add(block + ".c1.relu", NodeKind::kReLU, NoAttrs{}, {x});
        x = g.add(block + ".c2", NodeKind::kConv, conv3x3(c_out, c_out, 1, false), {x});
        x = g.add(block + ".c2.bn", NodeKind::kBatchNorm, BatchNormAttrs{c_out, 1}, {x});
        x = g.add(block + ".add", NodeKind::kAdd, NoAttrs{}, {x, bypass});
        x = g.add(block + ".relu", NodeKind::kReLU, NoAttrs{}, {x});
      }
      c = c_out;
    }
  }
  add_head(g, x, 64, 10);
  return g;
}

Graph build_reactnet_a() {
  struct Stage {
    std::size_t c_in;
    std::size_t c_out;
    std::size_t stride;
  };
  constexpr std::array<Stage, 13> kStages{{
      {32, 64, 1},    {64, 128, 2},   {128, 128, 1},  {128, 256, 2},
      {256, 256, 1},  {256, 512, 2},  {512, 512, 1},  {512, 512, 1},
      {512, 512, 1},  {512, 512, 1},  {512, 512, 1},  {512, 1024, 2},
      {1024, 1024, 1},
  }};

  Graph g;
  g.name = "reactnet-a";
  std::string x = g.add("input", NodeKind::kInput, InputAttrs{3, 224, 224});
  x = g.add("stem", NodeKind::kConv, conv3x3(3, 32, 2, false), {x});
  x = g.add("stem_bn", NodeKind::kBatchNorm, BatchNormAttrs{32, 1}, {x});

  for (std::size_t i = 0; i < kStages.size(); ++i) {
    const auto& st = kStages[i];
    const std::string p = "b" + std::to_string(i + 1);
    const std::string block_in = x;

    x = g.add(p + ".sign1", NodeKind::kSign, NoAttrs{}, {block_in});
    x = g.add(p + ".conv3", NodeKind::kBconv, conv3x3(st.c_in, st.c_in, st.stride, true), {x});
    x = g.add(p + ".bn1", NodeKind::kBatchNorm, BatchNormAttrs{st.c_in, 1}, {x});
    const std::string bypass1 =
        st.stride == 1 ? block_in
                       : g.add(p + ".pool", NodeKind::kAvgPool,
                               PoolAttrs{2, 2, false}, {block_in});
    x = g.add(p + ".add1", NodeKind::kAdd, NoAttrs{}, {x, bypass1});
    const std::string mid =
        g.add(p + ".act1", NodeKind::kPReLUShifted, ChannelAttrs{st.c_in}, {x});

    x = g.add(p + ".sign2", NodeKind::kSign, NoAttrs{}, {mid});
    x = g.add(p + ".conv1", NodeKind::kBconv, conv1x1(st.c_in, st.c_out, true), {x});
    x = g.add(p + ".bn2", NodeKind::kBatchNorm, BatchNormAttrs{st.c_out, 1}, {x});
    const std::string bypass2 =
        st.c_out == st.c_in
            ? mid
            : g.add(p + ".dup", NodeKind::kRepeat,
                    RepeatAttrs{st.c_out / st.c_in, ""}, {mid});
    x = g.add(p + ".add2", NodeKind::kAdd, NoAttrs{}, {x, bypass2});
    x = g.add(p + ".act2", NodeKind::kPReLUShifted, ChannelAttrs{st.c_out}, {x});
  }
  add_head(g, x, 1024, 1000);
  return g;
}

Graph build_toy_net(const ToyNetOptions& o) {
  Graph g;
  g.name = o.binary ? "toy-binary" : "toy";
  std::string x = g.add("input", NodeKind::kInput,
                        InputAttrs{o.in_channels, o.size, o.size});
  x = g.add("stem", NodeKind::kConv, conv3x3(o.in_channels, o.width, 1, false), {x});
  x = g.add("stem_bn", NodeKind::kBatchNorm, BatchNormAttrs{o.width, 1}, {x});
  if (!o.binary) x = g.add("stem_relu", NodeKind::kReLU, NoAttrs{}, {x});
  for (std::size_t b = 1; b <= o.blocks; ++b) {
    const std::string p = "l" + std::to_string(b);
    const std::string layer_in = x;
    if (o.binary) {
      x = g.add(p + ".sign", NodeKind::kSign, NoAttrs{}, {x});
      x = g.add(p, NodeKind::kBconv, conv3x3(o.width, o.width, 1, true), {x});
    } else {
      x = g.add(p, NodeKind::kConv, conv3x3(o.width, o.width, 1, false), {x});
    }
    x = g.add(p + ".bn", NodeKind::kBatchNorm, BatchNormAttrs{o.width, 1}, {x});
    if (o.residual) x = g.add(p + ".add", NodeKind::kAdd, NoAttrs{}, {x, layer_in});
    if (!o.binary) x = g.add(p + ".relu", NodeKind::kReLU, NoAttrs{}, {x});
  }
  add_head(g, x, o.width, o.classes);
  return g;
}

}  // namespace repbnn
