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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace repbnn {

/// Rank-4 NCHW extent.
struct Dims {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  /// Elements of one sample, c*h*w.
  std::size_t sample_size() const { return c * h * w; }
  std::size_t plane() const { return h * w; }
  std::string str() const;

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Real-valued NCHW tensor. Values are immutable after construction and the
/// constructors reject NaN/Inf.
class DenseTensor {
 public:
  DenseTensor() = default;
  /// Zero-filled tensor.
  explicit DenseTensor(Dims dims);
  DenseTensor(Dims dims, std::vector<float> data);

  const Dims& dims() const { return dims_; }
  std::size_t numel() const { return data_.size(); }
  std::span<const float> data() const { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h,
                     std::size_t w) const {
    return ((n * dims_.c + c) * dims_.h + h) * dims_.w + w;
  }
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }

  /// Moves the buffer out; used by callers that build a new tensor from an
  /// existing one.
  std::vector<float> release() && { return std::move(data_); }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Dims dims_{};
  std::vector<float> data_;
};

/// Sign-valued tensor packed 64 bits per word. Each sample's (c, h, w) values
/// are flattened channel-major and padded to a word boundary; bit 1 encodes
/// +1, bit 0 encodes -1, and padding bits are always 0.
class BitTensor {
 public:
  using Word = std::uint64_t;
  static constexpr std::size_t kWordBits = 64;

  BitTensor() = default;
  /// All bits 0 (every value -1).
  explicit BitTensor(Dims dims);
  /// Takes ownership of packed words. Throws if the word count is wrong or a
  /// padding bit is set.
  BitTensor(Dims dims, std::vector<Word> words);

  const Dims& dims() const { return dims_; }
  std::size_t words_per_sample() const { return words_per_sample_; }
  std::size_t pad_bits() const {
    return words_per_sample_ * kWordBits - dims_.sample_size();
  }
  std::span<const Word> words() const { return words_; }
  std::span<const Word> sample_words(std::size_t n) const {
    return std::span<const Word>(words_).subspan(n * words_per_sample_,
                                                 words_per_sample_);
  }

  /// `index` is the flattened (c, h, w) position inside sample `n`.
  bool bit(std::size_t n, std::size_t index) const {
    const Word word = words_[n * words_per_sample_ + index / kWordBits];
    return (word >> (index % kWordBits)) & 1U;
  }
  /// +1 or -1.
  int value(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return bit(n, (c * dims_.h + h) * dims_.w + w) ? 1 : -1;
  }

  friend bool operator==(const BitTensor&, const BitTensor&) = default;

 private:
  friend class BitTensorBuilder;

  Dims dims_{};
  std::size_t words_per_sample_ = 0;
  std::vector<Word> words_;
};

/// Mutable staging area for BitTensor construction.
class BitTensorBuilder {
 public:
  explicit BitTensorBuilder(Dims dims);
  void set(std::size_t n, std::size_t index, bool value);
  BitTensor build() &&;

 private:
  BitTensor tensor_;
};

/// Convolution hyperparameters. `beta` > 1 describes a replicated (Rep)
/// convolution: the c_out x c_in kernel is stored as (c_out/beta, c_in*beta).
struct ConvSpec {
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t beta = 1;
  bool binary = false;

  /// Throws on zero sizes, zero stride, or beta not dividing c_out.
  void validate() const;
  std::size_t physical_c_in() const { return c_in * beta; }
  std::size_t physical_c_out() const { return c_out / beta; }
  Dims kernel_dims() const { return {c_out, c_in, kh, kw}; }
  Dims reshaped_kernel_dims() const {
    return {physical_c_out(), physical_c_in(), kh, kw};
  }
  std::size_t out_extent(std::size_t in, std::size_t k) const {
    return (in + 2 * padding - k) / stride + 1;
  }

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// sign(0) is +1 throughout the library. The popcount identity in the binary
// convolution relies on every element mapping to exactly one of +-1.
BitTensor sign_binarize(const DenseTensor& x);
/// Elementwise sign with sign(0) = +1, kept in the dense domain.
DenseTensor sign_dense(const DenseTensor& x);
/// Expands packed bits to a dense tensor of +-1.
DenseTensor unpack(const BitTensor& x);

/// Concatenates `times` copies of x along the channel axis.
DenseTensor repeat_channels(const DenseTensor& x, std::size_t times);
BitTensor repeat_channels_bits(const BitTensor& x, std::size_t times);

/// Reinterprets a (c_out, c_in, kh, kw) kernel as
/// (c_out/beta, c_in*beta, kh, kw). The flat buffer is unchanged.
DenseTensor reshape_kernel(const DenseTensor& w, const ConvSpec& spec);

// Tensor blobs: a 16-byte header of four little-endian uint32 dims (n, c, h,
// w) followed by little-endian float32 values (dense) or uint64 packed words
// (bit). The blob carries no type tag; readers must know what they expect.
void write_blob(std::ostream& out, const DenseTensor& t);
void write_blob(std::ostream& out, const BitTensor& t);
DenseTensor read_dense_blob(std::istream& in);
BitTensor read_bit_blob(std::istream& in);
void save_blob(const std::string& path, const DenseTensor& t);
DenseTensor load_dense_blob(const std::string& path);
/// Bytes a dense blob of the given dims occupies.
std::size_t dense_blob_size(const Dims& dims);

}  // namespace repbnn
