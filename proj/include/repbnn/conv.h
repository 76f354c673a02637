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

#include "repbnn/tensor.h"

namespace repbnn {

/// The plain convolution a Rep spec executes: c_in*beta -> c_out/beta, beta 1.
ConvSpec physical_spec(const ConvSpec& spec);

/// Zero-padded cross-correlation. `spec.beta` must be 1; x has spec.c_in
/// channels and w is (c_out, c_in, kh, kw).
DenseTensor conv2d_dense(const DenseTensor& x, const DenseTensor& w,
                         const ConvSpec& spec);

/// XNOR/popcount convolution over sign-valued operands. Each output is
/// 2 * popcount(xnor(window, kernel)) - N, where N counts only in-bounds
/// taps: padded positions contribute nothing, exactly as a real zero does in
/// conv2d_dense. The result is integer-valued and bit-identical to
/// conv2d_dense(unpack(x), unpack(w), spec).
DenseTensor conv2d_xnor(const BitTensor& x, const BitTensor& w,
                        const ConvSpec& spec);

/// Replicated convolution. x has c_in*beta channels, w is already reshaped to
/// (c_out/beta, c_in*beta, kh, kw); the convolution output is repeated
/// beta^2 times along channels, giving c_out*beta channels.
DenseTensor rep_conv(const DenseTensor& x, const DenseTensor& w,
                     const ConvSpec& spec);
DenseTensor rep_conv(const BitTensor& x, const BitTensor& w,
                     const ConvSpec& spec);

/// Distinct values a binary convolution output can take: c_in*beta*kh*kw + 1.
std::size_t quantization_levels(const ConvSpec& spec);

}  // namespace repbnn
