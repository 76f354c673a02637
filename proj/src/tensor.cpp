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

#include "repbnn/tensor.h"

#include <array>
#include <cstring>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "repbnn/error.h"

namespace repbnn {

namespace {

std::size_t words_for(std::size_t bits) {
  return (bits + BitTensor::kWordBits - 1) / BitTensor::kWordBits;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw Error(ErrorCode::kIoError, "truncated tensor blob");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

void write_header(std::ostream& out, const Dims& d) {
  for (std::size_t v : {d.n, d.c, d.h, d.w}) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::kIoError, "dimension exceeds uint32 range");
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
}

Dims read_header(std::istream& in) {
  Dims d;
  d.n = get_le<std::uint32_t>(in);
  d.c = get_le<std::uint32_t>(in);
  d.h = get_le<std::uint32_t>(in);
  d.w = get_le<std::uint32_t>(in);
  return d;
}

}  // namespace

std::string Dims::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

DenseTensor::DenseTensor(Dims dims) : dims_(dims), data_(dims.numel(), 0.0F) {}

DenseTensor::DenseTensor(Dims dims, std::vector<float> data)
    : dims_(dims), data_(std::move(data)) {
  if (data_.size() != dims_.numel()) {
    throw Error(ErrorCode::kShapeMismatch,
                "data length " + std::to_string(data_.size()) +
                    " does not match dims " + dims_.str());
  }
  for (float v : data_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite tensor value");
    }
  }
}

BitTensor::BitTensor(Dims dims)
    : dims_(dims),
      words_per_sample_(words_for(dims.sample_size())),
      words_(dims.n * words_per_sample_, 0) {}

BitTensor::BitTensor(Dims dims, std::vector<Word> words)
    : dims_(dims),
      words_per_sample_(words_for(dims.sample_size())),
      words_(std::move(words)) {
  if (words_.size() != dims_.n * words_per_sample_) {
    throw Error(ErrorCode::kShapeMismatch,
                "packed word count does not match dims " + dims_.str());
  }
  const std::size_t tail = dims_.sample_size() % kWordBits;
  if (tail != 0) {
    const Word pad_mask = ~((Word{1} << tail) - 1);
    for (std::size_t n = 0; n < dims_.n; ++n) {
      if (words_[(n + 1) * words_per_sample_ - 1] & pad_mask) {
        throw Error(ErrorCode::kInvalidArgument, "padding bits must be zero");
      }
    }
  }
}

BitTensorBuilder::BitTensorBuilder(Dims dims) : tensor_(dims) {}

void BitTensorBuilder::set(std::size_t n, std::size_t index, bool value) {
  auto& word = tensor_.words_[n * tensor_.words_per_sample_ +
                              index / BitTensor::kWordBits];
  const BitTensor::Word mask = BitTensor::Word{1}
                               << (index % BitTensor::kWordBits);
  if (value) {
    word |= mask;
  } else {
    word &= ~mask;
  }
}

BitTensor BitTensorBuilder::build() && { return std::move(tensor_); }

void ConvSpec::validate() const {
  if (c_in == 0 || c_out == 0 || kh == 0 || kw == 0) {
    throw Error(ErrorCode::kInvalidArgument, "conv sizes must be positive");
  }
  if (stride == 0) {
    throw Error(ErrorCode::kInvalidArgument, "conv stride must be positive");
  }
  if (beta == 0) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be positive");
  }
  if (c_out % beta != 0) {
    throw Error(ErrorCode::kNonDivisibleChannels,
                "beta " + std::to_string(beta) + " does not divide c_out " +
                    std::to_string(c_out));
  }
}

BitTensor sign_binarize(const DenseTensor& x) {
  const Dims& d = x.dims();
  const std::size_t per_sample = d.sample_size();
  const std::size_t wps = words_for(per_sample);
  std::vector<BitTensor::Word> words(d.n * wps, 0);
  auto data = x.data();
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t i = 0; i < per_sample; ++i) {
      if (data[n * per_sample + i] >= 0.0F) {
        words[n * wps + i / BitTensor::kWordBits] |=
            BitTensor::Word{1} << (i % BitTensor::kWordBits);
      }
    }
  }
  return BitTensor(d, std::move(words));
}

DenseTensor sign_dense(const DenseTensor& x) {
  std::vector<float> out(x.numel());
  auto data = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = data[i] >= 0.0F ? 1.0F : -1.0F;
  }
  return DenseTensor(x.dims(), std::move(out));
}

DenseTensor unpack(const BitTensor& x) {
  const Dims& d = x.dims();
  const std::size_t per_sample = d.sample_size();
  std::vector<float> out(d.numel());
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t i = 0; i < per_sample; ++i) {
      out[n * per_sample + i] = x.bit(n, i) ? 1.0F : -1.0F;
    }
  }
  return DenseTensor(d, std::move(out));
}

DenseTensor repeat_channels(const DenseTensor& x, std::size_t times) {
  if (times == 0) {
    throw Error(ErrorCode::kInvalidArgument, "repeat times must be >= 1");
  }
  const Dims& d = x.dims();
  const std::size_t block = d.sample_size();
  std::vector<float> out;
  out.reserve(d.numel() * times);
  auto data = x.data();
  for (std::size_t n = 0; n < d.n; ++n) {
    auto sample = data.subspan(n * block, block);
    for (std::size_t t = 0; t < times; ++t) {
      out.insert(out.end(), sample.begin(), sample.end());
    }
  }
  return DenseTensor({d.n, d.c * times, d.h, d.w}, std::move(out));
}

BitTensor repeat_channels_bits(const BitTensor& x, std::size_t times) {
  if (times == 0) {
    throw Error(ErrorCode::kInvalidArgument, "repeat times must be >= 1");
  }
  const Dims& d = x.dims();
  const Dims out_dims{d.n, d.c * times, d.h, d.w};
  const std::size_t block = d.sample_size();
  BitTensorBuilder builder(out_dims);
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t i = 0; i < block; ++i) {
      if (!x.bit(n, i)) continue;
      for (std::size_t t = 0; t < times; ++t) builder.set(n, t * block + i, true);
    }
  }
  return std::move(builder).build();
}

DenseTensor reshape_kernel(const DenseTensor& w, const ConvSpec& spec) {
  spec.validate();
  if (w.dims() != spec.kernel_dims()) {
    throw Error(ErrorCode::kShapeMismatch,
                "kernel dims " + w.dims().str() + " do not match spec " +
                    spec.kernel_dims().str());
  }
  std::vector<float> flat(w.data().begin(), w.data().end());
  return DenseTensor(spec.reshaped_kernel_dims(), std::move(flat));
}

void write_blob(std::ostream& out, const DenseTensor& t) {
  write_header(out, t.dims());
  for (float v : t.data()) {
    std::uint32_t bits = 0;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(v));
    put_le<std::uint32_t>(out, bits);
  }
}

void write_blob(std::ostream& out, const BitTensor& t) {
  write_header(out, t.dims());
  for (BitTensor::Word word : t.words()) put_le<std::uint64_t>(out, word);
}

DenseTensor read_dense_blob(std::istream& in) {
  const Dims d = read_header(in);
  std::vector<float> data(d.numel());
  for (float& v : data) {
    const auto bits = get_le<std::uint32_t>(in);
    std::memcpy(&v, &bits, sizeof(v));
  }
  return DenseTensor(d, std::move(data));
}

BitTensor read_bit_blob(std::istream& in) {
  const Dims d = read_header(in);
  std::vector<BitTensor::Word> words(d.n * words_for(d.sample_size()));
  for (auto& word : words) word = get_le<std::uint64_t>(in);
  return BitTensor(d, std::move(words));
}

void save_blob(const std::string& path, const DenseTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path);
  write_blob(out, t);
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path);
}

DenseTensor load_dense_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return read_dense_blob(in);
}

std::size_t dense_blob_size(const Dims& dims) {
  return 16 + 4 * dims.numel();
}

}  // namespace repbnn
