// Copyright 2026 The rnsim Authors.
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

// Labeled datasets: IDX files (MNIST layout) and small synthetic sets.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rnsim/tensor.hpp"

namespace rnsim {

struct Dataset {
  Tensor inputs;  // [N, ...]
  std::vector<int> labels;
  int classes = 0;

  std::size_t size() const { return labels.size(); }
  // Samples [begin, begin + count) in order.
  Dataset Slice(std::size_t begin, std::size_t count) const;
  // Samples at the given indices, in that order.
  Dataset Gather(const std::vector<std::size_t>& indices) const;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Images as [N, 1, rows, cols] scaled to [0, 1]. Throws kIoError, kBadMagic,
// kTruncatedFile, kCountMismatch.
Dataset LoadIdxDataset(const std::string& images_path, const std::string& labels_path);

// Writers for the same layout; pixels and labels are raw bytes.
void WriteIdxImages(const std::string& path, std::size_t count, std::size_t rows,
                    std::size_t cols, const std::vector<std::uint8_t>& pixels);
void WriteIdxLabels(const std::string& path, const std::vector<std::uint8_t>& labels);

enum class SynthKind { kBlobs, kXor };

SynthKind ParseSynthKind(std::string_view name);

// 2-D points, inputs [N, 2].
// kBlobs: two unit-variance Gaussian clouds whose centres lie `separation`
// standard deviations apart, labels alternating.
// kXor: four clouds at (+-s/2, +-s/2), label = quadrant sign parity.
// Throws kInvalidArgument for n < 2.
Dataset SynthDataset(SynthKind kind, std::size_t n, std::uint64_t seed,
                     double separation = 10.0);

}  // namespace rnsim
