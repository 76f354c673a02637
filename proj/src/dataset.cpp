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

#include "repbnn/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "repbnn/error.h"

namespace repbnn {

Activation Dataset::batch(const std::vector<std::size_t>& indices) const {
  const std::size_t s = sample_dims.sample_size();
  Activation a{{indices.size(), sample_dims.c, sample_dims.h, sample_dims.w}, {}};
  a.data.resize(indices.size() * s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(images.begin() + static_cast<std::ptrdiff_t>(indices[i] * s), s,
                a.data.begin() + static_cast<std::ptrdiff_t>(i * s));
  }
  return a;
}

Dataset make_blobs(std::size_t count, std::size_t classes, const Dims& sample_dims,
                   std::uint64_t seed) {
  if (classes < 2 || classes > 256) {
    throw Error(ErrorCode::kDatasetError, "blobs need between 2 and 256 classes");
  }
  Dataset d{{1, sample_dims.c, sample_dims.h, sample_dims.w}, {}, {}, classes};
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0F, 0.5F);
  const float cy = (static_cast<float>(sample_dims.h) - 1.0F) / 2.0F;
  const float cx = (static_cast<float>(sample_dims.w) - 1.0F) / 2.0F;
  const float radius = std::min(cx, cy) * 0.6F;
  const float sigma = std::max(1.0F, radius * 0.5F);
  d.images.reserve(count * sample_dims.sample_size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = i % classes;
    const float angle = 2.0F * std::numbers::pi_v<float> * static_cast<float>(k) /
                        static_cast<float>(classes);
    const float by = cy + radius * std::sin(angle);
    const float bx = cx + radius * std::cos(angle);
    for (std::size_t c = 0; c < sample_dims.c; ++c) {
      for (std::size_t y = 0; y < sample_dims.h; ++y) {
        for (std::size_t x = 0; x < sample_dims.w; ++x) {
          const float dy = static_cast<float>(y) - by;
          const float dx = static_cast<float>(x) - bx;
          const float bump = 2.0F * std::exp(-(dx * dx + dy * dy) / (2.0F * sigma * sigma));
          d.images.push_back(bump - 0.5F + noise(rng));
        }
      }
    }
    d.labels.push_back(static_cast<std::uint8_t>(k));
  }
  return d;
}

Dataset load_labelled_bytes(const std::string& path, const Dims& sample_dims,
                            std::size_t classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kDatasetError, "cannot open dataset '" + path + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::size_t s = sample_dims.sample_size();
  const std::size_t record = s + 1;
  if (bytes.empty() || bytes.size() % record != 0) {
    throw Error(ErrorCode::kDatasetError,
                "dataset '" + path + "' size " + std::to_string(bytes.size()) +
                    " is not a multiple of the record size " + std::to_string(record));
  }
  Dataset d{{1, sample_dims.c, sample_dims.h, sample_dims.w}, {}, {}, classes};
  const std::size_t count = bytes.size() / record;
  d.images.reserve(count * s);
  for (std::size_t r = 0; r < count; ++r) {
    const unsigned char* p = &bytes[r * record];
    if (p[0] >= classes) {
      throw Error(ErrorCode::kDatasetError, "record " + std::to_string(r) + " has label " +
                                                std::to_string(p[0]) + " >= " +
                                                std::to_string(classes));
    }
    d.labels.push_back(p[0]);
    for (std::size_t i = 0; i < s; ++i) {
      d.images.push_back(static_cast<float>(p[i + 1]) / 127.5F - 1.0F);
    }
  }
  return d;
}

void save_labelled_bytes(const std::string& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  const std::size_t s = d.sample_dims.sample_size();
  for (std::size_t r = 0; r < d.size(); ++r) {
    out.put(static_cast<char>(d.labels[r]));
    for (std::size_t i = 0; i < s; ++i) {
      const float v = std::clamp((d.images[r * s + i] + 1.0F) * 127.5F, 0.0F, 255.0F);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& spec, const Dims& sample_dims, std::size_t classes,
                     std::uint64_t seed) {
  if (spec == "blobs" || spec.starts_with("blobs:")) {
    std::size_t count = 256;
    if (spec.size() > 6) {
      try {
        std::size_t used = 0;
        count = std::stoul(spec.substr(6), &used);
        if (used != spec.size() - 6) throw std::invalid_argument(spec);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kDatasetError, "bad blobs spec '" + spec + "'");
      }
    }
    return make_blobs(count, classes, sample_dims, seed);
  }
  return load_labelled_bytes(spec, sample_dims, classes);
}

namespace {
constexpr const char* kCheckpointMagic = "repbnn-weights 1";
}

void save_params(const std::string& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << kCheckpointMagic << '\n';
  std::size_t offset = 0;
  for (const auto& [key, p] : params) {
    out << key << '\t' << offset << '\n';
    offset += dense_blob_size(p.dims);
  }
  out << "end\n";
  for (const auto& [key, p] : params) write_blob(out, DenseTensor(p.dims, p.value));
  if (!out) throw Error(ErrorCode::kIoError, "write to '" + path + "' failed");
}

ParamStore load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw Error(ErrorCode::kParseError, "'" + path + "' is not a weights checkpoint");
  }
  std::vector<std::pair<std::string, std::size_t>> manifest;
  while (std::getline(in, line) && line != "end") {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::kParseError, "bad manifest line '" + line + "'");
    }
    manifest.emplace_back(line.substr(0, tab), std::stoul(line.substr(tab + 1)));
  }
  if (line != "end") throw Error(ErrorCode::kParseError, "checkpoint manifest not terminated");
  const std::streampos base = in.tellg();
  ParamStore params;
  for (const auto& [key, offset] : manifest) {
    in.seekg(base + static_cast<std::streamoff>(offset));
    DenseTensor t = read_dense_blob(in);
    const Dims dims = t.dims();
    const bool buffer = key.ends_with(".running_mean") || key.ends_with(".running_var");
    params.emplace(key, Param{dims, std::move(t).release(), !buffer});
  }
  return params;
}

}  // namespace repbnn
