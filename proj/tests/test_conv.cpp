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

#include <set>

#include "repbnn/conv.h"
#include "repbnn/error.h"
#include "test_support.h"

namespace repbnn {
namespace {

using testing::random_signs;
using testing::reference_conv;
using testing::to_dense;

TEST(ConvDense, MatchesIntegerReference) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const ConvSpec spec{1 + rng() % 5, 1 + rng() % 5, 1 + rng() % 3, 1 + rng() % 3,
                        1 + rng() % 2, rng() % 2, 1, false};
    const Dims xd{1 + rng() % 2, spec.c_in, spec.kh + rng() % 5, spec.kw + rng() % 5};
    const auto x = random_signs(xd.numel(), rng);
    const auto w = random_signs(spec.kernel_dims().numel(), rng);
    Dims od;
    const auto ref = reference_conv(x, xd, w, spec.kernel_dims(), spec.stride, spec.padding, &od);
    const DenseTensor y = conv2d_dense(to_dense(xd, x), to_dense(spec.kernel_dims(), w), spec);
    ASSERT_EQ(y.dims(), od);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_EQ(y.data()[i], ref[i]);
  }
}

TEST(ConvXnor, EqualsDenseOnRandomShapes) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const ConvSpec spec{1 + rng() % 70, 1 + rng() % 6, 1 + rng() % 3, 1 + rng() % 3,
                        1 + rng() % 2, rng() % 2, 1, true};
    const Dims xd{1 + rng() % 2, spec.c_in, spec.kh + rng() % 5, spec.kw + rng() % 5};
    const DenseTensor x = to_dense(xd, random_signs(xd.numel(), rng));
    const DenseTensor w = to_dense(spec.kernel_dims(), random_signs(spec.kernel_dims().numel(), rng));
    ASSERT_EQ(conv2d_xnor(sign_binarize(x), sign_binarize(w), spec), conv2d_dense(x, w, spec))
        << "c_in=" << spec.c_in << " k=" << spec.kh << "x" << spec.kw;
  }
}

TEST(ConvXnor, PaddingIsNotCountedAsMinusOne) {
  // All-ones 3x3 input and kernel with pad 1: corner sees 4 taps, not 9.
  const ConvSpec spec{1, 1, 3, 3, 1, 1, 1, true};
  const DenseTensor x({1, 1, 3, 3}, std::vector<float>(9, 1.0F));
  const DenseTensor w({1, 1, 3, 3}, std::vector<float>(9, 1.0F));
  const DenseTensor y = conv2d_xnor(sign_binarize(x), sign_binarize(w), spec);
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0F);
  EXPECT_EQ(y.at(0, 0, 1, 1), 9.0F);
  EXPECT_EQ(y.at(0, 0, 0, 1), 6.0F);
}

TEST(ConvXnor, ShapeMismatch) {
  const ConvSpec spec{2, 1, 1, 1, 1, 0, 1, true};
  EXPECT_THROW(conv2d_xnor(BitTensor({1, 3, 2, 2}), BitTensor({1, 2, 1, 1}), spec), Error);
}

TEST(ConvDense, RejectsRepSpec) {
  const ConvSpec spec{2, 2, 1, 1, 1, 0, 2, false};
  EXPECT_THROW(conv2d_dense(DenseTensor({1, 2, 1, 1}), DenseTensor({2, 2, 1, 1}), spec), Error);
}

// rep_conv(repeat(x), reshape(w)) repeats the beta-block sums of conv(x, w).
TEST(RepConv, BlockSumIdentity) {
  std::mt19937_64 rng(9);
  for (std::size_t beta : {2U, 4U}) {
    for (int trial = 0; trial < 20; ++trial) {
      const ConvSpec spec{1 + rng() % 4, beta * (1 + rng() % 3), 3, 3, 1 + rng() % 2, 1, beta,
                          true};
      const ConvSpec base{spec.c_in, spec.c_out, 3, 3, spec.stride, 1, 1, true};
      const Dims xd{2, spec.c_in, 6, 6};
      const DenseTensor x = to_dense(xd, random_signs(xd.numel(), rng));
      const DenseTensor w =
          to_dense(spec.kernel_dims(), random_signs(spec.kernel_dims().numel(), rng));

      const DenseTensor y = conv2d_dense(x, w, base);
      const Dims yd = y.dims();
      const std::size_t groups = spec.c_out / beta;
      std::vector<float> sums(yd.n * groups * yd.plane(), 0.0F);
      for (std::size_t n = 0; n < yd.n; ++n)
        for (std::size_t o = 0; o < spec.c_out; ++o)
          for (std::size_t p = 0; p < yd.plane(); ++p)
            sums[(n * groups + o / beta) * yd.plane() + p] += y.data()[(n * yd.c + o) * yd.plane() + p];
      const DenseTensor expected =
          repeat_channels(DenseTensor({yd.n, groups, yd.h, yd.w}, sums), beta * beta);

      const DenseTensor xr = repeat_channels(x, beta);
      const DenseTensor wr = reshape_kernel(w, spec);
      EXPECT_EQ(rep_conv(xr, wr, spec), expected);
      EXPECT_EQ(rep_conv(sign_binarize(xr), sign_binarize(wr), spec), expected);
      EXPECT_EQ(rep_conv(xr, wr, spec).dims().c, spec.c_out * beta);
    }
  }
}

TEST(Quantization, LevelsAndParity) {
  for (std::size_t c_in = 1; c_in <= 6; ++c_in) {
    const ConvSpec spec{c_in, 1, 1, 1, 1, 0, 1, true};
    std::set<float> seen;
    for (std::size_t mask = 0; mask < (1U << c_in); ++mask) {
      std::vector<float> xv(c_in);
      for (std::size_t c = 0; c < c_in; ++c) xv[c] = (mask >> c) & 1U ? 1.0F : -1.0F;
      const DenseTensor x({1, c_in, 1, 1}, xv);
      const DenseTensor w({1, c_in, 1, 1}, std::vector<float>(c_in, 1.0F));
      const float v = conv2d_xnor(sign_binarize(x), sign_binarize(w), spec).data()[0];
      EXPECT_EQ(static_cast<long>(v - static_cast<float>(c_in)) % 2, 0);
      seen.insert(v);
    }
    EXPECT_EQ(seen.size(), quantization_levels(spec));
  }
  EXPECT_EQ(quantization_levels({16, 16, 3, 3, 1, 1, 2, true}), 16U * 2 * 9 + 1);
  EXPECT_THROW(quantization_levels({16, 16, 3, 3, 1, 1, 1, false}), Error);
}

}  // namespace
}  // namespace repbnn
