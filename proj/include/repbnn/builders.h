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

#include "repbnn/graph.h"

namespace repbnn {

/// How ResNet-20 bypasses change shape at a stage boundary.
enum class ResNetShortcut {
  /// Stride-2 subsample and zero channel padding; parameter free. This is
  /// the shortcut of the common CIFAR ResNet-20 BNN baselines.
  kZeroPad,
  /// Stride-2 average pool, full-precision 1x1 conv, BatchNorm.
  kPoolConv,
};

/// CIFAR ResNet-20 at 3x32x32: stem conv, 3 stages x 3 blocks x 2 convs
/// (16/32/64 channels), global pool, FC to 10 classes. The binary variant
/// uses Sign -> Bconv -> BN with a bypass around every conv layer; the float
/// variant uses standard two-conv residual blocks with ReLU.
Graph build_resnet20(bool binary, ResNetShortcut shortcut = ResNetShortcut::kZeroPad);

/// ReActNet-A: MobileNetV1 layout at 3x224x224 with each depthwise-separable
/// pair replaced by a 3x3 and a 1x1 binary conv, RPReLU activations modelled
/// as PReLUShifted, and average-pool downsampling bypasses. Channel-doubling
/// 1x1 layers take their bypass through Repeat(times=2).
Graph build_reactnet_a();

struct ToyNetOptions {
  std::size_t in_channels = 3;
  std::size_t size = 8;
  std::size_t width = 16;
  std::size_t blocks = 2;
  std::size_t classes = 2;
  bool binary = true;
  bool residual = true;
};

/// Small stem + `blocks` conv layers + global pool + FC, for training tests.
Graph build_toy_net(const ToyNetOptions& options);

}  // namespace repbnn
