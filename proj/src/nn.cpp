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

#include "rnsim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "rnsim/parallel.hpp"

namespace rnsim {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t Product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string DimsString(const std::vector<std::size_t>& dims) {
  return Tensor(dims).ShapeString();
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Every GEMM of a pass gets its own corruption stream.
GemmOptions GemmFor(const ExecConfig& exec, bool quantize, std::uint64_t tag) {
  GemmOptions g;
  g.threads = exec.threads;
  if (exec.core && quantize) {
    g.core = exec.core;
    if (exec.p_err && *exec.p_err > 0.0) {
      g.corruption = CorruptionOptions{*exec.p_err,
                                       SplitMix64(exec.corruption_seed ^ SplitMix64(tag))};
    }
  }
  return g;
}

// [N, C, H, W] <-> [C, N*H*W] for the conv GEMM layout.
Tensor ChannelsToRows(const Tensor& t) {
  const std::size_t n = t.dim(0), c = t.dim(1), plane = t.dim(2) * t.dim(3);
  Tensor out({c, n * plane});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        out.at(ch, s * plane + p) = t[(s * c + ch) * plane + p];
      }
    }
  }
  return out;
}

void CheckFinite(const Tensor& t, const char* what) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteInput, std::string(what) + " holds a non-finite value");
    }
  }
}

Tensor QuantizeDequantizeRows(const Tensor& t, int bits) {
  const std::size_t rows = t.rank() >= 2 ? t.dim(0) : 1;
  const std::size_t cols = t.size() / std::max<std::size_t>(rows, 1);
  QuantizedMatrix q = QuantizeRows(t.data(), rows, cols, bits);
  Tensor out(t.dims());
  for (std::size_t r = 0; r < rows; ++r) {
    const double step = double(q.scales[r]) / double(MaxCode(bits));
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = static_cast<float>(double(q.values[r * cols + c]) * step);
    }
  }
  return out;
}

void PutU32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

std::uint32_t GetU32(const std::vector<char>& buf, std::size_t& at, const std::string& path) {
  if (buf.size() < at + 4) throw Error(ErrorCode::kTruncatedFile, path + ": cut short");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= std::uint32_t{static_cast<unsigned char>(buf[at + i])} << (8 * i);
  }
  at += 4;
  return v;
}

}  // namespace

std::vector<std::vector<std::size_t>> ModelSpec::Shapes() const {
  std::vector<std::vector<std::size_t>> shapes;
  std::vector<std::size_t> cur = input_dims;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kShapeMismatch,
                "layer " + std::to_string(shapes.size()) + ": " + what + " on input " +
                    DimsString(cur));
  };
  for (const LayerSpec& layer : layers) {
    std::visit(Overloaded{
                   [&](const LinearSpec& l) {
                     if (cur.size() != 1 || cur[0] != l.in || l.out == 0) {
                       fail("linear expects " + std::to_string(l.in) + " features");
                     }
                     cur = {l.out};
                   },
                   [&](const Conv2dSpec& c) {
                     if (cur.size() != 3 || cur[0] != c.cin || c.cout == 0) {
                       fail("conv expects " + std::to_string(c.cin) + " channels");
                     }
                     cur = {c.cout, ConvOutputSize(cur[1], c.kernel, c.stride),
                            ConvOutputSize(cur[2], c.kernel, c.stride)};
                   },
                   [&](const ReluSpec&) {},
                   [&](const FlattenSpec&) { cur = {Product(cur)}; },
               },
               layer);
    shapes.push_back(cur);
  }
  if (cur.size() != 1) fail("the classifier head needs a flat input");
  return shapes;
}

std::size_t ModelSpec::classes() const { return Shapes().back()[0]; }

ModelSpec ModelSpec::Mlp(std::size_t in, std::size_t hidden, std::size_t classes) {
  return {{in}, {LinearSpec{in, hidden}, ReluSpec{}, LinearSpec{hidden, classes}}};
}

ModelSpec ModelSpec::SmallCnn(std::size_t channels, std::size_t height,
                              std::size_t width, std::size_t classes) {
  const std::size_t filters = 8, kernel = 5, stride = 2;
  const std::size_t ho = ConvOutputSize(height, kernel, stride);
  const std::size_t wo = ConvOutputSize(width, kernel, stride);
  return {{channels, height, width},
          {Conv2dSpec{channels, filters, kernel, stride}, ReluSpec{}, FlattenSpec{},
           LinearSpec{filters * ho * wo, classes}}};
}

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.Shapes();
  std::mt19937_64 rng(seed);
  auto init = [&](std::vector<std::size_t> dims, std::size_t fan_in) {
    const float limit = static_cast<float>(std::sqrt(6.0 / double(fan_in)));
    std::uniform_real_distribution<float> d(-limit, limit);
    Tensor w(std::move(dims));
    for (float& v : w.data()) v = d(rng);
    return w;
  };
  for (const LayerSpec& layer : spec_.layers) {
    if (const auto* l = std::get_if<LinearSpec>(&layer)) {
      param_index_.push_back(static_cast<int>(params_.size()));
      params_.push_back(init({l->out, l->in}, l->in));
      params_.push_back(Tensor({l->out}));
    } else if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
      param_index_.push_back(static_cast<int>(params_.size()));
      params_.push_back(init({c->cout, c->cin, c->kernel, c->kernel},
                             c->cin * c->kernel * c->kernel));
      params_.push_back(Tensor({c->cout}));
    } else {
      param_index_.push_back(-1);
    }
  }
}

Model::Forward Model::Run(const Tensor& x, const ExecConfig& exec) const {
  std::vector<std::size_t> want = spec_.input_dims;
  want.insert(want.begin(), x.rank() ? x.dim(0) : 0);
  if (x.dims() != want) {
    throw Error(ErrorCode::kShapeMismatch,
                "model input " + x.ShapeString() + ", expected " + DimsString(want));
  }
  CheckFinite(x, "model input");
  Forward fwd;
  fwd.activations.push_back(x);
  const std::size_t n = x.dim(0);
  for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
    const Tensor& in = fwd.activations.back();
    const GemmOptions gemm = GemmFor(exec, exec.quantize_forward, li);
    Tensor out = std::visit(
        Overloaded{
            [&](const LinearSpec& l) {
              const Tensor& w = params_[param_index_[li]];
              const Tensor& b = params_[param_index_[li] + 1];
              Tensor yt = TiledGemm(w, in.Transposed(), gemm);  // [out, N]
              Tensor y({n, l.out});
              for (std::size_t s = 0; s < n; ++s) {
                for (std::size_t o = 0; o < l.out; ++o) y.at(s, o) = yt.at(o, s) + b[o];
              }
              return y;
            },
            [&](const Conv2dSpec& c) {
              const Tensor& b = params_[param_index_[li] + 1];
              Tensor y = Conv2dAsGemm(in, params_[param_index_[li]], c.stride, gemm);
              const std::size_t plane = y.dim(2) * y.dim(3);
              for (std::size_t s = 0; s < n; ++s) {
                for (std::size_t o = 0; o < c.cout; ++o) {
                  for (std::size_t p = 0; p < plane; ++p) {
                    y[(s * c.cout + o) * plane + p] += b[o];
                  }
                }
              }
              return y;
            },
            [&](const ReluSpec&) {
              Tensor y = in;
              for (float& v : y.data()) v = std::max(v, 0.0f);
              return y;
            },
            [&](const FlattenSpec&) { return in.Reshaped({n, in.size() / std::max<std::size_t>(n, 1)}); },
        },
        spec_.layers[li]);
    fwd.activations.push_back(std::move(out));
  }
  return fwd;
}

Model::Gradients Model::Backward(const Forward& fwd, const Tensor& grad_logits,
                                 const ExecConfig& exec) const {
  if (fwd.activations.size() != spec_.layers.size() + 1 ||
      grad_logits.dims() != fwd.logits().dims()) {
    throw Error(ErrorCode::kShapeMismatch, "gradient does not match the forward pass");
  }
  Gradients grads;
  grads.params.resize(params_.size());
  Tensor g = grad_logits;
  const std::size_t n = grad_logits.dim(0);
  for (std::size_t li = spec_.layers.size(); li-- > 0;) {
    const Tensor& in = fwd.activations[li];
    // Two GEMMs per layer, tags distinct from the forward ones.
    const GemmOptions g_input = GemmFor(exec, exec.quantize_backward, 1000 + 2 * li);
    const GemmOptions g_weight = GemmFor(exec, exec.quantize_backward, 1001 + 2 * li);
    g = std::visit(
        Overloaded{
            [&](const LinearSpec& l) {
              const int pi = param_index_[li];
              const Tensor& w = params_[pi];
              const Tensor gt = g.Transposed();                 // [out, N]
              grads.params[pi] = TiledGemm(gt, in, g_weight);  // [out, in]
              Tensor db({l.out});
              for (std::size_t s = 0; s < n; ++s) {
                for (std::size_t o = 0; o < l.out; ++o) db[o] += g.at(s, o);
              }
              grads.params[pi + 1] = std::move(db);
              return TiledGemm(w.Transposed(), gt, g_input).Transposed();  // [N, in]
            },
            [&](const Conv2dSpec& c) {
              const int pi = param_index_[li];
              const Tensor& w = params_[pi];
              const std::size_t ck = w.size() / c.cout;
              const Tensor gy = ChannelsToRows(g);  // [cout, N*Ho*Wo]
              const Tensor cols = Im2Col(in, c.kernel, c.stride);
              grads.params[pi] =
                  TiledGemm(gy, cols.Transposed(), g_weight).Reshaped(w.dims());
              Tensor db({c.cout});
              for (std::size_t o = 0; o < c.cout; ++o) {
                for (std::size_t j = 0; j < gy.dim(1); ++j) db[o] += gy.at(o, j);
              }
              grads.params[pi + 1] = std::move(db);
              const Tensor dcols =
                  TiledGemm(w.Reshaped({c.cout, ck}).Transposed(), gy, g_input);
              return Col2Im(dcols, in.dims(), c.kernel, c.stride);
            },
            [&](const ReluSpec&) {
              Tensor out = g;
              for (std::size_t i = 0; i < out.size(); ++i) {
                if (!(in[i] > 0.0f)) out[i] = 0.0f;
              }
              return out;
            },
            [&](const FlattenSpec&) { return g.Reshaped(in.dims()); },
        },
        spec_.layers[li]);
  }
  grads.input = std::move(g);
  return grads;
}

LossResult SoftmaxCrossEntropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "logits and labels disagree");
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  LossResult out{0.0f, Tensor({n, c})};
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    if (labels[s] < 0 || static_cast<std::size_t>(labels[s]) >= c) {
      throw Error(ErrorCode::kOutOfRange, "label outside the class range");
    }
    float mx = logits.at(s, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(s, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(double(logits.at(s, j) - mx));
    const double log_z = std::log(z);
    total += log_z - double(logits.at(s, labels[s]) - mx);
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(double(logits.at(s, j) - mx) - log_z);
      const double target = static_cast<std::size_t>(labels[s]) == j ? 1.0 : 0.0;
      out.grad.at(s, j) = static_cast<float>((p - target) / double(n));
    }
  }
  out.loss = static_cast<float>(total / double(n));
  return out;
}

SgdOptimizer::SgdOptimizer(SgdConfig config, const Model& model) : config_(config) {
  for (const Tensor& p : model.params()) velocity_.emplace_back(p.dims());
}

void SgdOptimizer::Step(Model& model, const std::vector<Tensor>& grads) {
  auto& params = model.params();
  if (grads.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one gradient per parameter expected");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].dims() != params[i].dims()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "gradient " + grads[i].ShapeString() + " for parameter " +
                      params[i].ShapeString());
    }
    Tensor& v = velocity_[i];
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = config_.momentum * v[j] + grads[i][j];
      params[i][j] -= config_.lr * v[j];
    }
    if (!config_.fp32_master) params[i] = QuantizeDequantizeRows(params[i], config_.master_bits);
  }
}

TrainReport Train(Model& model, const Dataset& data, const TrainOptions& options) {
  if (data.size() == 0 || options.batch_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty dataset or batch");
  }
  SgdOptimizer opt(options.sgd, model);
  TrainReport report;
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::uint64_t epoch = 0;
  const std::size_t batch = std::min(options.batch_size, data.size());
  for (std::size_t step = 0; step < options.steps; ++step) {
    if (cursor + batch > order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng = SubstreamRng(options.seed, epoch++);
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    std::vector<std::size_t> idx(order.begin() + cursor, order.begin() + cursor + batch);
    cursor += batch;
    const Dataset mb = data.Gather(idx);
    ExecConfig exec = options.exec;
    exec.corruption_seed = SplitMix64(options.exec.corruption_seed + step);
    const Model::Forward fwd = model.Run(mb.inputs, exec);
    LossResult loss = SoftmaxCrossEntropy(fwd.logits(), mb.labels);
    report.losses.push_back(loss.loss);
    opt.Step(model, model.Backward(fwd, loss.grad, exec).params);
  }
  report.train_accuracy = Evaluate(model, data, options.exec);
  return report;
}

double Evaluate(const Model& model, const Dataset& data, const ExecConfig& exec,
                std::size_t batch_size) {
  if (data.size() == 0) return 0.0;
  batch_size = std::max<std::size_t>(batch_size, 1);
  std::size_t correct = 0;
  for (std::size_t begin = 0, b = 0; begin < data.size(); begin += batch_size, ++b) {
    const Dataset mb = data.Slice(begin, std::min(batch_size, data.size() - begin));
    ExecConfig e = exec;
    e.corruption_seed = SplitMix64(exec.corruption_seed ^ (0xe7a1ULL + b));
    const Tensor logits = model.Run(mb.inputs, e).logits();
    const std::size_t c = logits.dim(1);
    for (std::size_t s = 0; s < mb.size(); ++s) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j) {
        if (logits.at(s, j) > logits.at(s, best)) best = j;
      }
      correct += static_cast<int>(best) == mb.labels[s];
    }
  }
  return double(correct) / double(data.size());
}

void SaveWeights(const std::string& path, const Model& model) {
  std::string buf = "RNST";
  for (const Tensor& t : model.params()) {
    PutU32(buf, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.dims()) PutU32(buf, static_cast<std::uint32_t>(d));
    for (float v : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      PutU32(buf, bits);
    }
  }
  std::ofstream out(path, std::ios::binary);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
}

void LoadWeights(const std::string& path, Model& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  const std::vector<char> buf{std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>()};
  if (buf.size() < 4 || std::memcmp(buf.data(), "RNST", 4) != 0) {
    throw Error(ErrorCode::kBadMagic, path + ": not a weights file");
  }
  std::vector<Tensor> tensors;
  std::size_t at = 4;
  while (at < buf.size()) {
    const std::uint32_t rank = GetU32(buf, at, path);
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = GetU32(buf, at, path);
    std::vector<float> data(Product(dims));
    for (float& v : data) {
      const std::uint32_t bits = GetU32(buf, at, path);
      std::memcpy(&v, &bits, 4);
    }
    tensors.emplace_back(std::move(dims), std::move(data));
  }
  auto& params = model.params();
  if (tensors.size() != params.size()) {
    throw Error(ErrorCode::kCountMismatch,
                path + " holds " + std::to_string(tensors.size()) + " tensors, model has " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].dims() != params[i].dims()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "tensor " + std::to_string(i) + " is " + tensors[i].ShapeString() +
                      ", model expects " + params[i].ShapeString());
    }
  }
  params = std::move(tensors);
}

}  // namespace rnsim
