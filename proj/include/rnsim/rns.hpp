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

// Exact residue number system arithmetic.
//
// A ModuliSet is an immutable, shareable handle over a list of pairwise
// co-prime moduli with all CRT constants precomputed. Values are represented
// in the signed range [-psi, psi], psi = floor((M - 1) / 2); negative values
// map to A + M before per-modulus reduction.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rnsim/error.hpp"

namespace rnsim {

using BigInt = boost::multiprecision::cpp_int;

// Largest modulus accepted. Keeps every residue product inside 64 bits.
inline constexpr std::uint64_t kMaxModulus = std::uint64_t{1} << 32;

class ModuliSet {
 public:
  // Throws kInvalidModulus (empty list, m < 2 or m >= 2^32) or kNotCoprime.
  explicit ModuliSet(std::vector<std::uint64_t> moduli);

  // Named moduli sets: "rns4" .. "rns8".
  static ModuliSet Preset(std::string_view name);
  static std::vector<std::string> PresetNames();

  std::span<const std::uint64_t> moduli() const { return data_->moduli; }
  std::uint64_t modulus(std::size_t i) const { return data_->moduli[i]; }
  std::size_t size() const { return data_->moduli.size(); }

  // M, the product of all moduli.
  const BigInt& range() const { return data_->range; }
  // M_i = M / m_i.
  std::span<const BigInt> partial_products() const {
    return data_->partial_products;
  }
  // T_i with |M_i * T_i| mod m_i = 1, 0 <= T_i < m_i.
  std::span<const std::uint64_t> inverses() const { return data_->inverses; }
  // psi = floor((M - 1) / 2).
  const BigInt& half_range() const { return data_->half_range; }

  double log2_range() const { return data_->log2_range; }
  // max_i ceil(log2 m_i): the converter width needed to carry any residue.
  int residue_bits() const { return data_->residue_bits; }

  // True when M < 2^63, enabling the 64-bit reconstruction fast path below.
  bool fits_int64() const { return data_->fits_int64; }
  std::int64_t half_range_i64() const;

  // Residues of `value` (any sign) into `out`, size() entries.
  void Reduce(std::int64_t value, std::span<std::uint64_t> out) const;
  // CRT reconstruction into [0, M); requires fits_int64().
  std::uint64_t ReconstructUnsignedFast(
      std::span<const std::uint64_t> residues) const;
  // CRT reconstruction into [-psi, psi]; requires fits_int64().
  std::int64_t ReconstructSignedFast(
      std::span<const std::uint64_t> residues) const;

  // Two sets compare equal when their moduli lists are identical.
  bool operator==(const ModuliSet& other) const;

  std::string ToString() const;

 private:
  struct Data {
    std::vector<std::uint64_t> moduli;
    BigInt range;
    std::vector<BigInt> partial_products;
    std::vector<std::uint64_t> inverses;
    BigInt half_range;
    double log2_range = 0.0;
    int residue_bits = 0;
    bool fits_int64 = false;
    // (M_i * T_i) mod M, valid only when fits_int64.
    std::vector<std::uint64_t> crt_weights;
    std::uint64_t range_u64 = 0;
  };

  std::shared_ptr<const Data> data_;
};

class ResidueVector {
 public:
  // Throws kLengthMismatch or kOutOfRange when residues do not fit the set.
  ResidueVector(ModuliSet set, std::vector<std::uint64_t> residues);

  static ResidueVector Zeros(const ModuliSet& set);

  const ModuliSet& moduli_set() const { return set_; }
  std::span<const std::uint64_t> residues() const { return residues_; }
  std::uint64_t operator[](std::size_t i) const { return residues_[i]; }
  std::size_t size() const { return residues_.size(); }

  bool operator==(const ResidueVector& other) const {
    return set_ == other.set_ && residues_ == other.residues_;
  }

 private:
  ModuliSet set_;
  std::vector<std::uint64_t> residues_;
};

// Throws kOutOfRange when |value| > psi.
ResidueVector ForwardConvert(const BigInt& value, const ModuliSet& set);
ResidueVector ForwardConvert(std::int64_t value, const ModuliSet& set);

// Unique A in [-psi, psi] with the given residues.
BigInt CrtReconstruct(const ResidueVector& rv);
// Unique A in [0, M) with the given residues.
BigInt CrtReconstructUnsigned(const ResidueVector& rv);

// Element-wise ring operations; throw kModuliMismatch for different sets.
ResidueVector ResidueAdd(const ResidueVector& a, const ResidueVector& b);
ResidueVector ResidueSub(const ResidueVector& a, const ResidueVector& b);
ResidueVector ResidueMul(const ResidueVector& a, const ResidueVector& b);

// |sum_i w_i x_i| mod m in [0, m). Inputs may be of any sign; the sum is
// accumulated exactly in 128 bits. Throws kLengthMismatch.
std::uint64_t ModularDot(std::span<const std::int64_t> w,
                         std::span<const std::int64_t> x, std::uint64_t m);

// ceil(log2 v) for v >= 1.
int CeilLog2(std::uint64_t v);

struct RangeCheck {
  int b_out = 0;
  bool satisfied = false;
};

// b_out = b_in + b_w + ceil(log2 h) - 1; satisfied iff log2(M) >= b_out.
RangeCheck CheckRangeConstraint(int b_in, int b_w, std::size_t h,
                                const ModuliSet& set);

// Extended Euclid; returns x in [0, m) with a*x = 1 (mod m), or 0 when the
// inverse does not exist.
std::uint64_t ModInverse(std::uint64_t a, std::uint64_t m);

}  // namespace rnsim
