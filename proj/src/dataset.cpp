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

#include "rnsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

namespace rnsim {
namespace {

std::vector<std::uint8_t> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t BigEndian32(const std::vector<std::uint8_t>& bytes, std::size_t at,
                          const std::string& path) {
  if (bytes.size() < at + 4) {
    throw Error(ErrorCode::kTruncatedFile, path + ": header cut short");
  }
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void PutBigEndian32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

void CheckMagic(std::uint32_t got, std::uint32_t want, const std::string& path) {
  if (got != want) {
    throw Error(ErrorCode::kBadMagic, path + ": not an IDX file of the expected type");
  }
}

void WriteOrThrow(std::ofstream& out, const std::string& path) {
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
}

}  // namespace

Dataset Dataset::Slice(std::size_t begin, std::size_t count) const {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = begin + i;
  return Gather(idx);
}

Dataset Dataset::Gather(const std::vector<std::size_t>& indices) const {
  const std::size_t stride = size() ? inputs.size() / size() : 0;
  std::vector<std::size_t> dims = inputs.dims();
  dims[0] = indices.size();
  std::vector<float> data;
  data.reserve(indices.size() * stride);
  std::vector<int> lab;
  lab.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw Error(ErrorCode::kOutOfRange, "sample index out of range");
    auto row = inputs.data().subspan(i * stride, stride);
    data.insert(data.end(), row.begin(), row.end());
    lab.push_back(labels[i]);
  }
  return {Tensor(std::move(dims), std::move(data)), std::move(lab), classes};
}

Dataset LoadIdxDataset(const std::string& images_path, const std::string& labels_path) {
  const auto img = ReadFile(images_path);
  const auto lab = ReadFile(labels_path);
  CheckMagic(BigEndian32(img, 0, images_path), kIdxImagesMagic, images_path);
  CheckMagic(BigEndian32(lab, 0, labels_path), kIdxLabelsMagic, labels_path);
  const std::size_t n = BigEndian32(img, 4, images_path);
  const std::size_t rows = BigEndian32(img, 8, images_path);
  const std::size_t cols = BigEndian32(img, 12, images_path);
  const std::size_t n_labels = BigEndian32(lab, 4, labels_path);
  if (img.size() < 16 + n * rows * cols) {
    throw Error(ErrorCode::kTruncatedFile, images_path + ": pixel data cut short");
  }
  if (lab.size() < 8 + n_labels) {
    throw Error(ErrorCode::kTruncatedFile, labels_path + ": label data cut short");
  }
  if (n != n_labels) {
    throw Error(ErrorCode::kCountMismatch,
                std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
  }
  Dataset ds;
  std::vector<float> pixels(n * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = img[16 + i] / 255.0f;
  ds.inputs = Tensor({n, 1, rows, cols}, std::move(pixels));
  ds.labels.resize(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.classes = std::max(10, max_label + 1);
  return ds;
}

void WriteIdxImages(const std::string& path, std::size_t count, std::size_t rows,
                    std::size_t cols, const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != count * rows * cols) {
    throw Error(ErrorCode::kShapeMismatch, "pixel count does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  PutBigEndian32(out, kIdxImagesMagic);
  PutBigEndian32(out, static_cast<std::uint32_t>(count));
  PutBigEndian32(out, static_cast<std::uint32_t>(rows));
  PutBigEndian32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  WriteOrThrow(out, path);
}

void WriteIdxLabels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  PutBigEndian32(out, kIdxLabelsMagic);
  PutBigEndian32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  WriteOrThrow(out, path);
}

SynthKind ParseSynthKind(std::string_view name) {
  if (name == "blobs") return SynthKind::kBlobs;
  if (name == "xor") return SynthKind::kXor;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown synthetic dataset: " + std::string(name));
}

Dataset SynthDataset(SynthKind kind, std::size_t n, std::uint64_t seed,
                     double separation) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<float> data(2 * n);
  std::vector<int> labels(n);
  const double half = separation / 2;
  for (std::size_t i = 0; i < n; ++i) {
    double cx = 0, cy = 0;
    int label = 0;
    if (kind == SynthKind::kBlobs) {
      label = static_cast<int>(i % 2);
      // Centres on the diagonal, separation apart.
      const double s = (label ? half : -half) / std::sqrt(2.0);
      cx = s;
      cy = s;
    } else {
      const int quadrant = static_cast<int>(i % 4);
      const int sx = quadrant & 1, sy = (quadrant >> 1) & 1;
      cx = sx ? half : -half;
      cy = sy ? half : -half;
      label = sx ^ sy;
    }
    data[2 * i] = static_cast<float>(cx + noise(rng));
    data[2 * i + 1] = static_cast<float>(cy + noise(rng));
    labels[i] = label;
  }
  return {Tensor({n, 2}, std::move(data)), std::move(labels), 2};
}

}  // namespace rnsim
