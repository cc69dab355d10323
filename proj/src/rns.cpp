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

#include "rnsim/rns.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rnsim {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidModulus: return "InvalidModulus";
    case ErrorCode::kNotCoprime: return "NotCoprime";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kModuliMismatch: return "ModuliMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kUnknownPreset: return "UnknownPreset";
    case ErrorCode::kOutOfLegitimateRange: return "OutOfLegitimateRange";
    case ErrorCode::kInvalidRedundantModuli: return "InvalidRedundantModuli";
    case ErrorCode::kInvalidProbability: return "InvalidProbability";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kRangeViolation: return "RangeViolation";
    case ErrorCode::kPrecisionMismatch: return "PrecisionMismatch";
    case ErrorCode::kInvalidInverterCount: return "InvalidInverterCount";
    case ErrorCode::kDigitOverflow: return "DigitOverflow";
    case ErrorCode::kNumericDrift: return "NumericDrift";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kUnnormalized: return "Unnormalized";
    case ErrorCode::kDigitRangeViolation: return "DigitRangeViolation";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kExperimentFailed: return "ExperimentFailed";
    case ErrorCode::kVerificationFailed: return "VerificationFailed";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {

using u128 = unsigned __int128;

std::uint64_t ReduceMod(std::int64_t value, std::uint64_t m) {
  const auto sm = static_cast<std::int64_t>(m);
  std::int64_t r = value % sm;
  if (r < 0) r += sm;
  return static_cast<std::uint64_t>(r);
}

std::uint64_t ReduceMod(const BigInt& value, std::uint64_t m) {
  BigInt r = value % m;
  if (r < 0) r += m;
  return r.convert_to<std::uint64_t>();
}

}  // namespace

std::uint64_t ModInverse(std::uint64_t a, std::uint64_t m) {
  if (m == 1) return 0;
  std::int64_t old_r = static_cast<std::int64_t>(a % m);
  std::int64_t r = static_cast<std::int64_t>(m);
  std::int64_t old_s = 1;
  std::int64_t s = 0;
  while (r != 0) {
    const std::int64_t q = old_r / r;
    std::int64_t tmp = old_r - q * r;
    old_r = r;
    r = tmp;
    tmp = old_s - q * s;
    old_s = s;
    s = tmp;
  }
  if (old_r != 1) return 0;
  return ReduceMod(old_s, m);
}

ModuliSet::ModuliSet(std::vector<std::uint64_t> moduli) {
  if (moduli.empty()) {
    throw Error(ErrorCode::kInvalidModulus, "moduli list is empty");
  }
  for (std::uint64_t m : moduli) {
    if (m < 2 || m >= kMaxModulus) {
      throw Error(ErrorCode::kInvalidModulus,
                  "modulus " + std::to_string(m) + " outside [2, 2^32)");
    }
  }
  for (std::size_t i = 0; i < moduli.size(); ++i) {
    for (std::size_t j = i + 1; j < moduli.size(); ++j) {
      if (std::gcd(moduli[i], moduli[j]) != 1) {
        throw Error(ErrorCode::kNotCoprime,
                    std::to_string(moduli[i]) + " and " +
                        std::to_string(moduli[j]) + " share a factor");
      }
    }
  }

  auto data = std::make_shared<Data>();
  data->moduli = std::move(moduli);
  data->range = 1;
  for (std::uint64_t m : data->moduli) data->range *= m;

  data->partial_products.reserve(data->moduli.size());
  data->inverses.reserve(data->moduli.size());
  for (std::uint64_t m : data->moduli) {
    BigInt mi = data->range / m;
    const std::uint64_t ti = ModInverse(ReduceMod(mi, m), m);
    data->partial_products.push_back(std::move(mi));
    data->inverses.push_back(ti);
  }
  data->half_range = (data->range - 1) / 2;

  double log2 = 0.0;
  int bits = 0;
  for (std::uint64_t m : data->moduli) {
    log2 += std::log2(static_cast<double>(m));
    bits = std::max(bits, CeilLog2(m));
  }
  data->log2_range = log2;
  data->residue_bits = bits;

  data->fits_int64 = data->range < (BigInt(1) << 63);
  if (data->fits_int64) {
    data->range_u64 = data->range.convert_to<std::uint64_t>();
    for (std::size_t i = 0; i < data->moduli.size(); ++i) {
      BigInt w = (data->partial_products[i] * data->inverses[i]) % data->range;
      data->crt_weights.push_back(w.convert_to<std::uint64_t>());
    }
  }
  data_ = std::move(data);
}

ModuliSet ModuliSet::Preset(std::string_view name) {
  if (name == "rns4") return ModuliSet({15, 14, 13, 11});
  if (name == "rns5") return ModuliSet({31, 29, 28, 27});
  if (name == "rns6") return ModuliSet({63, 62, 61, 59});
  if (name == "rns7") return ModuliSet({127, 126, 125});
  if (name == "rns8") return ModuliSet({255, 254, 253});
  throw Error(ErrorCode::kUnknownPreset, std::string(name));
}

std::vector<std::string> ModuliSet::PresetNames() {
  return {"rns4", "rns5", "rns6", "rns7", "rns8"};
}

std::int64_t ModuliSet::half_range_i64() const {
  if (!fits_int64()) {
    throw Error(ErrorCode::kOutOfRange, "moduli range exceeds 64 bits");
  }
  return static_cast<std::int64_t>((data_->range_u64 - 1) / 2);
}

void ModuliSet::Reduce(std::int64_t value,
                       std::span<std::uint64_t> out) const {
  for (std::size_t i = 0; i < data_->moduli.size(); ++i) {
    out[i] = ReduceMod(value, data_->moduli[i]);
  }
}

std::uint64_t ModuliSet::ReconstructUnsignedFast(
    std::span<const std::uint64_t> residues) const {
  u128 acc = 0;
  for (std::size_t i = 0; i < residues.size(); ++i) {
    acc += static_cast<u128>(residues[i]) * data_->crt_weights[i];
  }
  return static_cast<std::uint64_t>(acc % data_->range_u64);
}

std::int64_t ModuliSet::ReconstructSignedFast(
    std::span<const std::uint64_t> residues) const {
  const std::uint64_t v = ReconstructUnsignedFast(residues);
  const std::uint64_t psi = (data_->range_u64 - 1) / 2;
  if (v <= psi) return static_cast<std::int64_t>(v);
  return static_cast<std::int64_t>(v) -
         static_cast<std::int64_t>(data_->range_u64);
}

bool ModuliSet::operator==(const ModuliSet& other) const {
  return data_ == other.data_ || data_->moduli == other.data_->moduli;
}

std::string ModuliSet::ToString() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < size(); ++i) {
    if (i) os << ',';
    os << modulus(i);
  }
  os << '}';
  return os.str();
}

ResidueVector::ResidueVector(ModuliSet set, std::vector<std::uint64_t> residues)
    : set_(std::move(set)), residues_(std::move(residues)) {
  if (residues_.size() != set_.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "residue count does not match moduli count");
  }
  for (std::size_t i = 0; i < residues_.size(); ++i) {
    if (residues_[i] >= set_.modulus(i)) {
      throw Error(ErrorCode::kOutOfRange, "residue not reduced");
    }
  }
}

ResidueVector ResidueVector::Zeros(const ModuliSet& set) {
  return ResidueVector(set, std::vector<std::uint64_t>(set.size(), 0));
}

ResidueVector ForwardConvert(const BigInt& value, const ModuliSet& set) {
  if (abs(value) > set.half_range()) {
    throw Error(ErrorCode::kOutOfRange,
                "|" + value.str() + "| exceeds psi = " +
                    set.half_range().str());
  }
  std::vector<std::uint64_t> residues(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    residues[i] = ReduceMod(value, set.modulus(i));
  }
  return ResidueVector(set, std::move(residues));
}

ResidueVector ForwardConvert(std::int64_t value, const ModuliSet& set) {
  return ForwardConvert(BigInt(value), set);
}

BigInt CrtReconstructUnsigned(const ResidueVector& rv) {
  const ModuliSet& set = rv.moduli_set();
  BigInt acc = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    acc += BigInt(rv[i]) * set.partial_products()[i] * set.inverses()[i];
  }
  return acc % set.range();
}

BigInt CrtReconstruct(const ResidueVector& rv) {
  BigInt v = CrtReconstructUnsigned(rv);
  if (v > rv.moduli_set().half_range()) v -= rv.moduli_set().range();
  return v;
}

namespace {

template <typename Op>
ResidueVector Elementwise(const ResidueVector& a, const ResidueVector& b,
                          Op op) {
  if (!(a.moduli_set() == b.moduli_set())) {
    throw Error(ErrorCode::kModuliMismatch,
                a.moduli_set().ToString() + " vs " + b.moduli_set().ToString());
  }
  const ModuliSet& set = a.moduli_set();
  std::vector<std::uint64_t> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    out[i] = op(a[i], b[i], set.modulus(i));
  }
  return ResidueVector(set, std::move(out));
}

}  // namespace

ResidueVector ResidueAdd(const ResidueVector& a, const ResidueVector& b) {
  return Elementwise(a, b, [](std::uint64_t x, std::uint64_t y,
                              std::uint64_t m) { return (x + y) % m; });
}

ResidueVector ResidueSub(const ResidueVector& a, const ResidueVector& b) {
  return Elementwise(a, b, [](std::uint64_t x, std::uint64_t y,
                              std::uint64_t m) { return (x + m - y) % m; });
}

ResidueVector ResidueMul(const ResidueVector& a, const ResidueVector& b) {
  return Elementwise(a, b, [](std::uint64_t x, std::uint64_t y,
                              std::uint64_t m) { return (x * y) % m; });
}

std::uint64_t ModularDot(std::span<const std::int64_t> w,
                         std::span<const std::int64_t> x, std::uint64_t m) {
  if (w.size() != x.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(w.size()) + " vs " + std::to_string(x.size()));
  }
  if (m < 1) throw Error(ErrorCode::kInvalidModulus, "m must be >= 1");
  __int128 acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += static_cast<__int128>(w[i]) * x[i];
  }
  __int128 r = acc % static_cast<__int128>(m);
  if (r < 0) r += m;
  return static_cast<std::uint64_t>(r);
}

int CeilLog2(std::uint64_t v) {
  if (v <= 1) return 0;
  return static_cast<int>(std::bit_width(v - 1));
}

RangeCheck CheckRangeConstraint(int b_in, int b_w, std::size_t h,
                                const ModuliSet& set) {
  RangeCheck out;
  out.b_out = b_in + b_w + CeilLog2(h) - 1;
  out.satisfied = out.b_out <= 0 || set.range() >= (BigInt(1) << out.b_out);
  return out;
}

}  // namespace rnsim
