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

// Dense FP32 tensors and GEMM executed tile by tile on a simulated core.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnsim/analog_core.hpp"

namespace rnsim {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);
  // Throws kShapeMismatch when data.size() != product(dims).
  Tensor(std::vector<std::size_t> dims, std::vector<float> data);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 access.
  float& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }

  Tensor Reshaped(std::vector<std::size_t> dims) const;
  Tensor Transposed() const;  // rank 2 only

  std::string ShapeString() const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

struct CorruptionOptions {
  double p_err = 0.0;
  std::uint64_t seed = 0;
};

struct GemmOptions {
  // Without a core the product is an FP32 GEMM.
  std::optional<CoreConfig> core;
  std::optional<CorruptionOptions> corruption;
  unsigned threads = 1;
};

// C = A * B for A (M x K), B (K x N). On a core, A is cut into h x h tiles
// (ragged edge tiles are smaller, as if zero padded with the padding left out
// of the scales); every tile row gets its own scale, every h-slice of a column
// of B one more. Partial outputs are rescaled and summed in FP32 in fixed
// k-tile order. Corruption draws from one substream per (column, row tile,
// k tile). Throws kShapeMismatch.
Tensor TiledGemm(const Tensor& a, const Tensor& b, const GemmOptions& options);

// Valid (unpadded) convolution geometry.
std::size_t ConvOutputSize(std::size_t in, std::size_t kernel, std::size_t stride);

// [N, C, H, W] -> [C*k*k, N*Ho*Wo]; column index (n, y, x), row index (c, i, j).
Tensor Im2Col(const Tensor& input, std::size_t kernel, std::size_t stride);
// Adjoint of Im2Col: scatters columns back into a [N, C, H, W] gradient.
Tensor Col2Im(const Tensor& cols, const std::vector<std::size_t>& input_dims,
              std::size_t kernel, std::size_t stride);

// input [N, C, H, W], kernels [Cout, C, k, k] -> [N, Cout, Ho, Wo] through
// Im2Col and TiledGemm.
Tensor Conv2dAsGemm(const Tensor& input, const Tensor& kernels, std::size_t stride,
                    const GemmOptions& options);

}  // namespace rnsim
