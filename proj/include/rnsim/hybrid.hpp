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

// Hybrid RNS + positional numbers: base-M_p digits, each held as residues
// over a primary set (the digit) and a secondary set (used to detect digit
// overflow and carry the quotient to the next digit).

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rnsim/rns.hpp"

namespace rnsim {

class HybridConfig {
 public:
  // Throws kNotCoprime unless primary and secondary moduli are jointly
  // pairwise co-prime.
  HybridConfig(ModuliSet primary, ModuliSet secondary);

  const ModuliSet& primary() const { return primary_; }
  const ModuliSet& secondary() const { return secondary_; }
  const BigInt& primary_range() const { return primary_.range(); }
  const BigInt& secondary_range() const { return secondary_.range(); }
  // |M_p^-1| per secondary modulus.
  const ResidueVector& mp_inverse() const { return mp_inverse_; }
  // Raw digit values must stay below M_p * M_s.
  const BigInt& digit_capacity() const { return capacity_; }

 private:
  ModuliSet primary_;
  ModuliSet secondary_;
  ResidueVector mp_inverse_;
  BigInt capacity_;
};

// Smallest integers above max(primary), co-prime with primary and with one
// another, until their product reaches min_range.
ModuliSet ChooseSecondaryModuli(const ModuliSet& primary, const BigInt& min_range);

struct HybridDigit {
  ResidueVector primary;
  ResidueVector secondary;
  // Largest value this digit may hold; the overflow checks rely on it.
  BigInt bound;
};

// Least-significant digit first.
struct HybridNumber {
  std::vector<HybridDigit> digits;
  std::size_t size() const { return digits.size(); }
};

// A digit holding v < M_p * M_s, not necessarily normalized.
// Throws kDigitRangeViolation.
HybridDigit RawDigit(const BigInt& v, const HybridConfig& cfg);

// Throws kOverflow when z >= M_p^digit_count, kOutOfRange when z < 0.
HybridNumber ToHybrid(const BigInt& z, std::size_t digit_count,
                      const HybridConfig& cfg);
// Sum of z_d M_p^d. Throws kUnnormalized when a digit's primary and
// secondary residues disagree or it exceeds M_p - 1.
BigInt FromHybrid(const HybridNumber& x, const HybridConfig& cfg);

// Same integer under the target moduli (CRT, then reduce). The value must be
// below the target's range to survive.
ResidueVector BaseExtend(const ResidueVector& residues, const ModuliSet& target);

struct CarrySplit {
  HybridDigit remainder;  // R = z mod M_p, dual encoded
  ResidueVector quotient_primary;
  ResidueVector quotient_secondary;
  bool carry = false;
};

// One step of the overflow test: R|p = z|p, R|s = p2s(R|p); on mismatch
// Q|s = (z|s - R|s) M_p^-1 and Q|p = s2p(Q|s).
CarrySplit SplitDigit(const HybridDigit& digit, const HybridConfig& cfg);

// Carries every digit into the next, appending digits while a carry remains.
// Throws kDigitRangeViolation when a digit's bound plus its incoming carry
// bound reaches M_p * M_s. `carries`, when given, receives each digit's Q.
HybridNumber NormalizeDigits(const HybridNumber& raw, const HybridConfig& cfg,
                             std::vector<BigInt>* carries = nullptr);

enum class OverflowPolicy { kExtend, kThrow };

// Digit-wise residue sum, then one normalization. With kThrow, a result
// needing more digits than the longer operand raises kOverflow.
HybridNumber HybridAdd(const HybridNumber& a, const HybridNumber& b,
                       const HybridConfig& cfg,
                       OverflowPolicy policy = OverflowPolicy::kExtend);

// Long multiplication in residue space; D_a + D_b output digits.
HybridNumber HybridMul(const HybridNumber& a, const HybridNumber& b,
                       const HybridConfig& cfg);

// Sum of products accumulated per digit, normalized once; output has
// D_w + D_x + ceil(log2 h) digits. Throws kLengthMismatch.
HybridNumber HybridDot(std::span<const HybridNumber> ws,
                       std::span<const HybridNumber> xs, const HybridConfig& cfg);

}  // namespace rnsim
