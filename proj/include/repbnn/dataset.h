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
#include <string>
#include <vector>

#include "repbnn/network.h"
#include "repbnn/tensor.h"

namespace repbnn {

/// In-memory labelled image set. Images are stored sample-major in NCHW.
struct Dataset {
  Dims sample_dims;  // n == 1
  std::vector<float> images;
  std::vector<std::uint8_t> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Gathers the given samples into one batch.
  Activation batch(const std::vector<std::size_t>& indices) const;
};

/// Synthetic blobs: class k places a Gaussian bump at the k-th point of a
/// circle around the image centre, plus N(0, 0.5) pixel noise. Labels cycle
/// through the classes.
Dataset make_blobs(std::size_t count, std::size_t classes, const Dims& sample_dims,
                   std::uint64_t seed);

/// Labelled-bytes records: one label byte followed by C*H*W pixel bytes in
/// CHW order (the CIFAR-10 binary layout). Pixels map to [-1, 1].
Dataset load_labelled_bytes(const std::string& path, const Dims& sample_dims,
                            std::size_t classes);
void save_labelled_bytes(const std::string& path, const Dataset& d);

/// "blobs" or "blobs:N" makes N (default 256) synthetic samples, anything
/// else is read as a labelled-bytes file.
Dataset load_dataset(const std::string& spec, const Dims& sample_dims, std::size_t classes,
                     std::uint64_t seed);

/// Checkpoint: the line "repbnn-weights 1", one "<node.param>\t<offset>" line
/// per parameter, the line "end", then the dense blobs back to back. Offsets
/// count bytes from the first blob.
void save_params(const std::string& path, const ParamStore& params);
ParamStore load_params(const std::string& path);

}  // namespace repbnn
