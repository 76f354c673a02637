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
#include <random>
#include <vector>

#include "repbnn/tensor.h"

namespace repbnn::testing {

inline DenseTensor random_dense(const Dims& d, std::mt19937_64& rng, float scale = 1.0F) {
  std::normal_distribution<float> dist(0.0F, scale);
  std::vector<float> v(d.numel());
  for (float& x : v) x = dist(rng);
  return DenseTensor(d, std::move(v));
}

inline std::vector<int> random_signs(std::size_t count, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<int> v(count);
  for (int& x : v) x = coin(rng) ? 1 : -1;
  return v;
}

inline DenseTensor to_dense(const Dims& d, const std::vector<int>& v) {
  std::vector<float> f(v.begin(), v.end());
  return DenseTensor(d, std::move(f));
}

// Direct integer cross-correlation; zero padding contributes nothing.
inline std::vector<long> reference_conv(const std::vector<int>& x, const Dims& xd,
                                        const std::vector<int>& w, const Dims& wd,
                                        std::size_t stride, std::size_t pad, Dims* out_dims) {
  const std::size_t oh = (xd.h + 2 * pad - wd.h) / stride + 1;
  const std::size_t ow = (xd.w + 2 * pad - wd.w) / stride + 1;
  *out_dims = {xd.n, wd.n, oh, ow};
  std::vector<long> y(out_dims->numel(), 0);
  for (std::size_t n = 0; n < xd.n; ++n)
    for (std::size_t o = 0; o < wd.n; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          long acc = 0;
          for (std::size_t c = 0; c < wd.c; ++c)
            for (std::size_t ky = 0; ky < wd.h; ++ky)
              for (std::size_t kx = 0; kx < wd.w; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(xd.h) ||
                    ix >= static_cast<long>(xd.w)) {
                  continue;
                }
                acc += x[((n * xd.c + c) * xd.h + static_cast<std::size_t>(iy)) * xd.w +
                         static_cast<std::size_t>(ix)] *
                       w[((o * wd.c + c) * wd.h + ky) * wd.w + kx];
              }
          y[((n * wd.n + o) * oh + oy) * ow + ox] = acc;
        }
  return y;
}

}  // namespace repbnn::testing
