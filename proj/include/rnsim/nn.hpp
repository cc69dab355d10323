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

// Small networks whose GEMMs run on a simulated core. Everything else
// (bias, ReLU, softmax, loss, weight update) stays in FP32.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rnsim/dataset.hpp"
#include "rnsim/tensor.hpp"

namespace rnsim {

struct LinearSpec {
  std::size_t in = 0;
  std::size_t out = 0;
};

struct Conv2dSpec {
  std::size_t cin = 0;
  std::size_t cout = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
};

struct ReluSpec {};
struct FlattenSpec {};

using LayerSpec = std::variant<LinearSpec, Conv2dSpec, ReluSpec, FlattenSpec>;

// Layers followed by a softmax cross-entropy head over the last output.
struct ModelSpec {
  std::vector<std::size_t> input_dims;  // per sample, e.g. {2} or {1, 28, 28}
  std::vector<LayerSpec> layers;

  // Per-sample output dims of every layer; throws kShapeMismatch.
  std::vector<std::vector<std::size_t>> Shapes() const;
  std::size_t classes() const;

  // in -> hidden -> classes with a ReLU between.
  static ModelSpec Mlp(std::size_t in, std::size_t hidden, std::size_t classes);
  // One 5x5 stride-2 conv with 8 filters, ReLU, flatten, linear classifier.
  static ModelSpec SmallCnn(std::size_t channels, std::size_t height,
                            std::size_t width, std::size_t classes);
};

// How GEMMs execute. Without a core, or with the input quantizer disabled,
// a GEMM is plain FP32.
struct ExecConfig {
  std::optional<CoreConfig> core;
  bool quantize_forward = true;   // quantize GEMM operands in the forward pass
  bool quantize_backward = true;  // ... and activation gradients going back
  std::optional<double> p_err;    // output corruption probability per tile output
  std::uint64_t corruption_seed = 0;
  unsigned threads = 1;
};

class Model {
 public:
  // Weights drawn uniform in +-sqrt(6 / fan_in), biases zero.
  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  // Weight and bias per parameterized layer, in layer order.
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

  struct Forward {
    std::vector<Tensor> activations;  // input of each layer, then the logits
    const Tensor& logits() const { return activations.back(); }
  };

  Forward Run(const Tensor& x, const ExecConfig& exec) const;

  struct Gradients {
    std::vector<Tensor> params;  // aligned with params()
    Tensor input;
  };

  Gradients Backward(const Forward& fwd, const Tensor& grad_logits,
                     const ExecConfig& exec) const;

 private:
  ModelSpec spec_;
  std::vector<Tensor> params_;
  std::vector<int> param_index_;  // first param of each layer, -1 if none
};

struct LossResult {
  float loss = 0.0f;
  Tensor grad;  // d mean loss / d logits
};

// Mean softmax cross-entropy over the batch. Throws kShapeMismatch.
LossResult SoftmaxCrossEntropy(const Tensor& logits, const std::vector<int>& labels);

struct SgdConfig {
  float lr = 0.1f;
  float momentum = 0.9f;
  // When false the weights are kept only in quantized form: every update is
  // followed by per-row quantization to master_bits.
  bool fp32_master = true;
  int master_bits = 8;
};

class SgdOptimizer {
 public:
  SgdOptimizer(SgdConfig config, const Model& model);

  // v = mu v + g ; W -= lr v
  void Step(Model& model, const std::vector<Tensor>& grads);

  const SgdConfig& config() const { return config_; }

 private:
  SgdConfig config_;
  std::vector<Tensor> velocity_;
};

struct TrainOptions {
  std::size_t steps = 500;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  SgdConfig sgd;
  ExecConfig exec;
};

struct TrainReport {
  std::vector<float> losses;  // one per step
  double train_accuracy = 0.0;
};

// Mini-batches from a seeded per-epoch shuffle.
TrainReport Train(Model& model, const Dataset& data, const TrainOptions& options);

// Fraction of samples whose argmax logit (first on ties) matches the label.
double Evaluate(const Model& model, const Dataset& data, const ExecConfig& exec,
                std::size_t batch_size = 256);

// "RNST", then per tensor: u32 rank, u32 dims, f32 data, all little endian.
void SaveWeights(const std::string& path, const Model& model);
// Throws kIoError, kBadMagic, kTruncatedFile, kCountMismatch, kShapeMismatch.
void LoadWeights(const std::string& path, Model& model);

}  // namespace rnsim
