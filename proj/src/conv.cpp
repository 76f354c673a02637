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

#include "repbnn/conv.h"

#include <bit>
#include <vector>

#include "repbnn/error.h"

namespace repbnn {

namespace {

using Word = BitTensor::Word;
constexpr std::size_t kBits = BitTensor::kWordBits;

void check_plain(const ConvSpec& spec) {
  spec.validate();
  if (spec.beta != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "plain convolution called with beta " +
                    std::to_string(spec.beta) + "; use rep_conv");
  }
}

Dims output_dims(const Dims& x, const ConvSpec& spec) {
  if (x.c != spec.c_in) {
    throw Error(ErrorCode::kShapeMismatch,
                "input has " + std::to_string(x.c) + " channels, spec expects " +
                    std::to_string(spec.c_in));
  }
  if (x.h + 2 * spec.padding < spec.kh || x.w + 2 * spec.padding < spec.kw) {
    throw Error(ErrorCode::kShapeMismatch,
                "kernel larger than padded input " + x.str());
  }
  return {x.n, spec.c_out, spec.out_extent(x.h, spec.kh),
          spec.out_extent(x.w, spec.kw)};
}

void check_kernel(const Dims& w, const ConvSpec& spec) {
  if (w != spec.kernel_dims()) {
    throw Error(ErrorCode::kShapeMismatch, "kernel dims " + w.str() +
                                               " do not match spec " +
                                               spec.kernel_dims().str());
  }
}

// Channel-innermost repacking: one run of `words` words per spatial position,
// holding that position's c bits.
struct ChannelPacked {
  std::size_t words = 0;
  std::vector<Word> data;
};

ChannelPacked pack_channels(const BitTensor& t) {
  const Dims& d = t.dims();
  ChannelPacked out;
  out.words = (d.c + kBits - 1) / kBits;
  out.data.assign(d.n * d.h * d.w * out.words, 0);
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      for (std::size_t p = 0; p < d.plane(); ++p) {
        if (!t.bit(n, c * d.plane() + p)) continue;
        out.data[(n * d.plane() + p) * out.words + c / kBits] |=
            Word{1} << (c % kBits);
      }
    }
  }
  return out;
}

}  // namespace

ConvSpec physical_spec(const ConvSpec& spec) {
  spec.validate();
  ConvSpec plain = spec;
  plain.c_in = spec.physical_c_in();
  plain.c_out = spec.physical_c_out();
  plain.beta = 1;
  return plain;
}

DenseTensor conv2d_dense(const DenseTensor& x, const DenseTensor& w,
                         const ConvSpec& spec) {
  check_plain(spec);
  check_kernel(w.dims(), spec);
  const Dims od = output_dims(x.dims(), spec);
  const Dims& xd = x.dims();
  std::vector<float> out(od.numel(), 0.0F);
  auto xs = x.data();
  auto ws = w.data();
  for (std::size_t n = 0; n < od.n; ++n) {
    for (std::size_t o = 0; o < od.c; ++o) {
      for (std::size_t oy = 0; oy < od.h; ++oy) {
        for (std::size_t ox = 0; ox < od.w; ++ox) {
          float acc = 0.0F;
          for (std::size_t c = 0; c < xd.c; ++c) {
            for (std::size_t ky = 0; ky < spec.kh; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * spec.stride + ky) -
                  static_cast<std::ptrdiff_t>(spec.padding);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(xd.h)) continue;
              for (std::size_t kx = 0; kx < spec.kw; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * spec.stride + kx) -
                    static_cast<std::ptrdiff_t>(spec.padding);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(xd.w)) continue;
                acc += xs[x.offset(n, c, iy, ix)] *
                       ws[((o * spec.c_in + c) * spec.kh + ky) * spec.kw + kx];
              }
            }
          }
          out[((n * od.c + o) * od.h + oy) * od.w + ox] = acc;
        }
      }
    }
  }
  return DenseTensor(od, std::move(out));
}

DenseTensor conv2d_xnor(const BitTensor& x, const BitTensor& w,
                        const ConvSpec& spec) {
  check_plain(spec);
  check_kernel(w.dims(), spec);
  const Dims od = output_dims(x.dims(), spec);
  const Dims& xd = x.dims();

  const ChannelPacked xp = pack_channels(x);
  // Weights repacked per (o, ky, kx) so that one tap is `words` words.
  const std::size_t words = xp.words;
  const std::size_t taps = spec.kh * spec.kw;
  std::vector<Word> wp(spec.c_out * taps * words, 0);
  for (std::size_t o = 0; o < spec.c_out; ++o) {
    for (std::size_t c = 0; c < spec.c_in; ++c) {
      for (std::size_t t = 0; t < taps; ++t) {
        if (!w.bit(o, c * taps + t)) continue;
        wp[(o * taps + t) * words + c / kBits] |= Word{1} << (c % kBits);
      }
    }
  }
  std::vector<Word> mask(words, ~Word{0});
  if (spec.c_in % kBits != 0) {
    mask.back() = (Word{1} << (spec.c_in % kBits)) - 1;
  }

  std::vector<float> out(od.numel(), 0.0F);
  for (std::size_t n = 0; n < od.n; ++n) {
    for (std::size_t o = 0; o < od.c; ++o) {
      for (std::size_t oy = 0; oy < od.h; ++oy) {
        for (std::size_t ox = 0; ox < od.w; ++ox) {
          long matches = 0;
          long valid = 0;
          for (std::size_t ky = 0; ky < spec.kh; ++ky) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * spec.stride + ky) -
                static_cast<std::ptrdiff_t>(spec.padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(xd.h)) continue;
            for (std::size_t kx = 0; kx < spec.kw; ++kx) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * spec.stride + kx) -
                  static_cast<std::ptrdiff_t>(spec.padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(xd.w)) continue;
              const Word* xw =
                  &xp.data[((n * xd.h + iy) * xd.w + ix) * words];
              const Word* ww = &wp[(o * taps + ky * spec.kw + kx) * words];
              for (std::size_t j = 0; j < words; ++j) {
                matches += std::popcount(~(xw[j] ^ ww[j]) & mask[j]);
              }
              valid += static_cast<long>(spec.c_in);
            }
          }
          out[((n * od.c + o) * od.h + oy) * od.w + ox] =
              static_cast<float>(2 * matches - valid);
        }
      }
    }
  }
  return DenseTensor(od, std::move(out));
}

DenseTensor rep_conv(const DenseTensor& x, const DenseTensor& w,
                     const ConvSpec& spec) {
  const ConvSpec plain = physical_spec(spec);
  return repeat_channels(conv2d_dense(x, w, plain), spec.beta * spec.beta);
}

DenseTensor rep_conv(const BitTensor& x, const BitTensor& w,
                     const ConvSpec& spec) {
  const ConvSpec plain = physical_spec(spec);
  return repeat_channels(conv2d_xnor(x, w, plain), spec.beta * spec.beta);
}

std::size_t quantization_levels(const ConvSpec& spec) {
  if (!spec.binary) {
    throw Error(ErrorCode::kInvalidArgument,
                "quantization levels are defined for binary convolutions");
  }
  return spec.physical_c_in() * spec.kh * spec.kw + 1;
}

}  // namespace repbnn
