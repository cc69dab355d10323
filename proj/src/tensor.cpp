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

#include "rnsim/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "rnsim/parallel.hpp"

namespace rnsim {
namespace {

std::size_t Product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

void RequireRank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    std::ostringstream msg;
    msg << what << " must have rank " << rank << ", got " << t.ShapeString();
    throw Error(ErrorCode::kShapeMismatch, msg.str());
  }
}

std::size_t CeilDiv(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

Tensor FloatGemm(const Tensor& a, const Tensor& b, unsigned threads) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const Tensor bt = b.Transposed();
  Tensor c({m, n});
  ParallelFor(m, threads, [&](std::size_t i) {
    const float* row = a.data().data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const float* col = bt.data().data() + j * k;
      float acc = 0.0f;
      for (std::size_t t = 0; t < k; ++t) acc += row[t] * col[t];
      c.at(i, j) = acc;
    }
  });
  return c;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, float fill)
    : dims_(std::move(dims)), data_(Product(dims_), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (data_.size() != Product(dims_)) {
    throw Error(ErrorCode::kShapeMismatch,
                "tensor data does not match shape " + ShapeString());
  }
}

Tensor Tensor::Reshaped(std::vector<std::size_t> dims) const {
  return Tensor(std::move(dims), data_);
}

Tensor Tensor::Transposed() const {
  RequireRank(*this, 2, "transposed tensor");
  const std::size_t r = dims_[0], c = dims_[1];
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = at(i, j);
  }
  return out;
}

std::string Tensor::ShapeString() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
  os << "]";
  return os.str();
}

Tensor TiledGemm(const Tensor& a, const Tensor& b, const GemmOptions& options) {
  RequireRank(a, 2, "GEMM left operand");
  RequireRank(b, 2, "GEMM right operand");
  if (a.dim(1) != b.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "GEMM inner dimensions differ: " + a.ShapeString() + " x " +
                    b.ShapeString());
  }
  if (!options.core) return FloatGemm(a, b, options.threads);

  const CoreConfig& core = *options.core;
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1), h = core.h();
  const std::size_t row_tiles = CeilDiv(m, h), k_tiles = CeilDiv(k, h);
  const int bits = core.b_dac();

  // Weight tiles are quantized once and shared by every column.
  std::vector<QuantizedMatrix> tiles(row_tiles * k_tiles);
  for (std::size_t rt = 0; rt < row_tiles; ++rt) {
    const std::size_t r0 = rt * h, rows = std::min(h, m - r0);
    for (std::size_t kt = 0; kt < k_tiles; ++kt) {
      const std::size_t c0 = kt * h, cols = std::min(h, k - c0);
      std::vector<float> block(rows * cols);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) block[r * cols + c] = a.at(r0 + r, c0 + c);
      }
      tiles[rt * k_tiles + kt] = QuantizeRows(block, rows, cols, bits);
    }
  }

  const Tensor bt = b.Transposed();
  Tensor c({m, n});
  ParallelFor(n, options.threads, [&](std::size_t j) {
    std::vector<float> acc(m, 0.0f);
    for (std::size_t kt = 0; kt < k_tiles; ++kt) {
      const std::size_t c0 = kt * h, cols = std::min(h, k - c0);
      const QuantizedVector x =
          QuantizeSymmetric(bt.data().subspan(j * k + c0, cols), bits);
      for (std::size_t rt = 0; rt < row_tiles; ++rt) {
        TileOutput out = Mvm(tiles[rt * k_tiles + kt], x, core);
        if (options.corruption && options.corruption->p_err > 0.0) {
          const std::uint64_t index = (j * row_tiles + rt) * k_tiles + kt;
          std::mt19937_64 rng = SubstreamRng(options.corruption->seed, index);
          out = CorruptOutputs(out, core, options.corruption->p_err, rng).output;
        }
        const std::size_t r0 = rt * h;
        for (std::size_t r = 0; r < out.as_float.size(); ++r) acc[r0 + r] += out.as_float[r];
      }
    }
    for (std::size_t i = 0; i < m; ++i) c.at(i, j) = acc[i];
  });
  return c;
}

std::size_t ConvOutputSize(std::size_t in, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0 || kernel > in) {
    throw Error(ErrorCode::kShapeMismatch, "kernel does not fit the input");
  }
  return (in - kernel) / stride + 1;
}

Tensor Im2Col(const Tensor& input, std::size_t kernel, std::size_t stride) {
  RequireRank(input, 4, "convolution input");
  const std::size_t n = input.dim(0), ch = input.dim(1), hi = input.dim(2),
                    wi = input.dim(3);
  const std::size_t ho = ConvOutputSize(hi, kernel, stride);
  const std::size_t wo = ConvOutputSize(wi, kernel, stride);
  const std::size_t rows = ch * kernel * kernel, cols = n * ho * wo;
  Tensor out({rows, cols});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        const std::size_t col = (s * ho + y) * wo + x;
        for (std::size_t c = 0; c < ch; ++c) {
          for (std::size_t i = 0; i < kernel; ++i) {
            for (std::size_t jj = 0; jj < kernel; ++jj) {
              const std::size_t row = (c * kernel + i) * kernel + jj;
              out.at(row, col) =
                  input[((s * ch + c) * hi + y * stride + i) * wi + x * stride + jj];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor Col2Im(const Tensor& cols, const std::vector<std::size_t>& input_dims,
              std::size_t kernel, std::size_t stride) {
  if (input_dims.size() != 4) {
    throw Error(ErrorCode::kShapeMismatch, "Col2Im needs [N, C, H, W]");
  }
  const std::size_t n = input_dims[0], ch = input_dims[1], hi = input_dims[2],
                    wi = input_dims[3];
  const std::size_t ho = ConvOutputSize(hi, kernel, stride);
  const std::size_t wo = ConvOutputSize(wi, kernel, stride);
  if (cols.rank() != 2 || cols.dim(0) != ch * kernel * kernel ||
      cols.dim(1) != n * ho * wo) {
    throw Error(ErrorCode::kShapeMismatch, "patch matrix does not match input");
  }
  Tensor out(input_dims);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        const std::size_t col = (s * ho + y) * wo + x;
        for (std::size_t c = 0; c < ch; ++c) {
          for (std::size_t i = 0; i < kernel; ++i) {
            for (std::size_t jj = 0; jj < kernel; ++jj) {
              const std::size_t row = (c * kernel + i) * kernel + jj;
              out[((s * ch + c) * hi + y * stride + i) * wi + x * stride + jj] +=
                  cols.at(row, col);
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor Conv2dAsGemm(const Tensor& input, const Tensor& kernels, std::size_t stride,
                    const GemmOptions& options) {
  RequireRank(input, 4, "convolution input");
  RequireRank(kernels, 4, "convolution kernels");
  const std::size_t k = kernels.dim(2);
  if (kernels.dim(1) != input.dim(1) || kernels.dim(3) != k) {
    throw Error(ErrorCode::kShapeMismatch,
                "kernels " + kernels.ShapeString() + " do not match input " +
                    input.ShapeString());
  }
  const std::size_t n = input.dim(0), cout = kernels.dim(0);
  const std::size_t ho = ConvOutputSize(input.dim(2), k, stride);
  const std::size_t wo = ConvOutputSize(input.dim(3), k, stride);
  const Tensor w = kernels.Reshaped({cout, kernels.size() / cout});
  const Tensor y = TiledGemm(w, Im2Col(input, k, stride), options);
  // [Cout, N*Ho*Wo] -> [N, Cout, Ho, Wo]
  Tensor out({n, cout, ho, wo});
  const std::size_t plane = ho * wo;
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t p = 0; p < plane; ++p) {
        out[(s * cout + co) * plane + p] = y.at(co, s * plane + p);
      }
    }
  }
  return out;
}

}  // namespace rnsim
