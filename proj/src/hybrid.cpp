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

#include "rnsim/hybrid.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace rnsim {
namespace {

ResidueVector InverseOfPrimary(const ModuliSet& primary, const ModuliSet& secondary) {
  std::vector<std::uint64_t> inv(secondary.size());
  for (std::size_t j = 0; j < secondary.size(); ++j) {
    const std::uint64_t m = secondary.modulus(j);
    const BigInt r = primary.range() % m;
    inv[j] = ModInverse(r.convert_to<std::uint64_t>(), m);
  }
  return ResidueVector(secondary, std::move(inv));
}

void CheckJointlyCoprime(const ModuliSet& a, const ModuliSet& b) {
  for (auto x : a.moduli()) {
    for (auto y : b.moduli()) {
      if (std::gcd(x, y) != 1) {
        std::ostringstream msg;
        msg << "primary modulus " << x << " and secondary modulus " << y
            << " share a factor";
        throw Error(ErrorCode::kNotCoprime, msg.str());
      }
    }
  }
}

// Plain reduction of a non-negative value of any size.
ResidueVector Residues(const BigInt& v, const ModuliSet& set) {
  std::vector<std::uint64_t> r(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    r[i] = static_cast<std::uint64_t>(BigInt(v % set.modulus(i)));
  }
  return ResidueVector(set, std::move(r));
}

HybridDigit ZeroDigit(const HybridConfig& cfg) {
  return {ResidueVector::Zeros(cfg.primary()), ResidueVector::Zeros(cfg.secondary()), 0};
}

HybridDigit AddDigits(const HybridDigit& a, const HybridDigit& b) {
  return {ResidueAdd(a.primary, b.primary), ResidueAdd(a.secondary, b.secondary),
          a.bound + b.bound};
}

HybridDigit MulDigits(const HybridDigit& a, const HybridDigit& b) {
  return {ResidueMul(a.primary, b.primary), ResidueMul(a.secondary, b.secondary),
          a.bound * b.bound};
}

void PadTo(HybridNumber& x, std::size_t digits, const HybridConfig& cfg) {
  while (x.digits.size() < digits) x.digits.push_back(ZeroDigit(cfg));
}

}  // namespace

HybridConfig::HybridConfig(ModuliSet primary, ModuliSet secondary)
    : primary_((CheckJointlyCoprime(primary, secondary), std::move(primary))),
      secondary_(std::move(secondary)),
      mp_inverse_(InverseOfPrimary(primary_, secondary_)),
      capacity_(primary_.range() * secondary_.range()) {}

ModuliSet ChooseSecondaryModuli(const ModuliSet& primary, const BigInt& min_range) {
  std::vector<std::uint64_t> chosen;
  BigInt product = 1;
  std::uint64_t candidate =
      *std::max_element(primary.moduli().begin(), primary.moduli().end()) + 1;
  auto coprime = [&](std::uint64_t c) {
    for (auto m : primary.moduli()) {
      if (std::gcd(c, m) != 1) return false;
    }
    for (auto m : chosen) {
      if (std::gcd(c, m) != 1) return false;
    }
    return true;
  };
  while (product < min_range) {
    if (candidate >= kMaxModulus) {
      throw Error(ErrorCode::kInvalidModulus, "secondary moduli exhausted");
    }
    if (coprime(candidate)) {
      chosen.push_back(candidate);
      product *= candidate;
    }
    ++candidate;
  }
  return ModuliSet(std::move(chosen));
}

HybridDigit RawDigit(const BigInt& v, const HybridConfig& cfg) {
  if (v < 0 || v >= cfg.digit_capacity()) {
    throw Error(ErrorCode::kDigitRangeViolation,
                "digit value outside [0, M_p * M_s)");
  }
  return {Residues(v, cfg.primary()), Residues(v, cfg.secondary()), v};
}

HybridNumber ToHybrid(const BigInt& z, std::size_t digit_count,
                      const HybridConfig& cfg) {
  if (z < 0) throw Error(ErrorCode::kOutOfRange, "hybrid numbers are unsigned");
  const BigInt& mp = cfg.primary_range();
  HybridNumber out;
  BigInt rest = z;
  for (std::size_t d = 0; d < digit_count; ++d) {
    HybridDigit digit = RawDigit(rest % mp, cfg);
    digit.bound = mp - 1;
    out.digits.push_back(std::move(digit));
    rest /= mp;
  }
  if (rest != 0) {
    throw Error(ErrorCode::kOverflow, "value needs more than " +
                                          std::to_string(digit_count) + " digits");
  }
  return out;
}

BigInt FromHybrid(const HybridNumber& x, const HybridConfig& cfg) {
  BigInt value = 0;
  BigInt weight = 1;
  for (std::size_t d = 0; d < x.digits.size(); ++d) {
    const HybridDigit& digit = x.digits[d];
    if (!(digit.primary.moduli_set() == cfg.primary()) ||
        !(digit.secondary.moduli_set() == cfg.secondary())) {
      throw Error(ErrorCode::kModuliMismatch, "digit built for another config");
    }
    const BigInt z = CrtReconstructUnsigned(digit.primary);
    if (!(Residues(z, cfg.secondary()) == digit.secondary)) {
      throw Error(ErrorCode::kUnnormalized,
                  "digit " + std::to_string(d) + " carries an unresolved overflow");
    }
    value += z * weight;
    weight *= cfg.primary_range();
  }
  return value;
}

ResidueVector BaseExtend(const ResidueVector& residues, const ModuliSet& target) {
  return Residues(CrtReconstructUnsigned(residues), target);
}

CarrySplit SplitDigit(const HybridDigit& digit, const HybridConfig& cfg) {
  ResidueVector r_s = BaseExtend(digit.primary, cfg.secondary());
  CarrySplit out{{digit.primary, r_s, std::min(digit.bound, BigInt(cfg.primary_range() - 1))},
                 ResidueVector::Zeros(cfg.primary()),
                 ResidueVector::Zeros(cfg.secondary()),
                 false};
  if (r_s == digit.secondary) return out;
  out.carry = true;
  out.quotient_secondary =
      ResidueMul(ResidueSub(digit.secondary, r_s), cfg.mp_inverse());
  out.quotient_primary = BaseExtend(out.quotient_secondary, cfg.primary());
  return out;
}

HybridNumber NormalizeDigits(const HybridNumber& raw, const HybridConfig& cfg,
                             std::vector<BigInt>* carries) {
  const BigInt& mp = cfg.primary_range();
  HybridNumber out;
  if (carries) carries->clear();
  HybridDigit carry = ZeroDigit(cfg);
  std::size_t d = 0;
  while (d < raw.digits.size() || carry.bound != 0) {
    HybridDigit digit = d < raw.digits.size() ? AddDigits(raw.digits[d], carry)
                                              : carry;
    if (digit.bound >= cfg.digit_capacity()) {
      std::ostringstream msg;
      msg << "digit " << d << " may reach " << digit.bound
          << ", beyond the overflow detector's range " << cfg.digit_capacity();
      throw Error(ErrorCode::kDigitRangeViolation, msg.str());
    }
    CarrySplit split = SplitDigit(digit, cfg);
    if (carries) {
      carries->push_back(split.carry ? CrtReconstructUnsigned(split.quotient_secondary)
                                     : BigInt(0));
    }
    carry = {split.quotient_primary, split.quotient_secondary, digit.bound / mp};
    out.digits.push_back(std::move(split.remainder));
    ++d;
  }
  return out;
}

HybridNumber HybridAdd(const HybridNumber& a, const HybridNumber& b,
                       const HybridConfig& cfg, OverflowPolicy policy) {
  const std::size_t width = std::max(a.size(), b.size());
  HybridNumber sum;
  for (std::size_t d = 0; d < width; ++d) {
    const HybridDigit za = d < a.size() ? a.digits[d] : ZeroDigit(cfg);
    const HybridDigit zb = d < b.size() ? b.digits[d] : ZeroDigit(cfg);
    sum.digits.push_back(AddDigits(za, zb));
  }
  HybridNumber out = NormalizeDigits(sum, cfg);
  if (out.size() > width) {
    // A carry bound may be nonzero while the actual carry is zero.
    bool spill = false;
    for (std::size_t d = width; d < out.size(); ++d) {
      spill = spill || CrtReconstructUnsigned(out.digits[d].primary) != 0;
    }
    if (spill && policy == OverflowPolicy::kThrow) {
      throw Error(ErrorCode::kOverflow, "sum needs more than " +
                                            std::to_string(width) + " digits");
    }
    if (!spill) out.digits.erase(out.digits.begin() + width, out.digits.end());
  }
  return out;
}

namespace {

// Adds the digit convolution of a and b into acc.
void AccumulateProduct(const HybridNumber& a, const HybridNumber& b,
                       HybridNumber& acc) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      acc.digits[i + j] = AddDigits(acc.digits[i + j], MulDigits(a.digits[i], b.digits[j]));
    }
  }
}

HybridNumber TrimTo(HybridNumber x, std::size_t digits, const HybridConfig& cfg) {
  for (std::size_t d = digits; d < x.size(); ++d) {
    if (CrtReconstructUnsigned(x.digits[d].primary) != 0) {
      throw Error(ErrorCode::kOverflow, "carry out of the top digit");
    }
  }
  if (x.size() > digits) x.digits.erase(x.digits.begin() + digits, x.digits.end());
  PadTo(x, digits, cfg);
  return x;
}

}  // namespace

HybridNumber HybridMul(const HybridNumber& a, const HybridNumber& b,
                       const HybridConfig& cfg) {
  const std::size_t width = a.size() + b.size();
  HybridNumber acc;
  PadTo(acc, width, cfg);
  AccumulateProduct(a, b, acc);
  return TrimTo(NormalizeDigits(acc, cfg), width, cfg);
}

HybridNumber HybridDot(std::span<const HybridNumber> ws,
                       std::span<const HybridNumber> xs, const HybridConfig& cfg) {
  if (ws.size() != xs.size()) {
    throw Error(ErrorCode::kLengthMismatch, "dot operands differ in length");
  }
  std::size_t dw = 0, dx = 0;
  for (const auto& w : ws) dw = std::max(dw, w.size());
  for (const auto& x : xs) dx = std::max(dx, x.size());
  const std::size_t width =
      dw + dx + (ws.empty() ? 0 : static_cast<std::size_t>(CeilLog2(ws.size())));
  HybridNumber acc;
  PadTo(acc, std::max<std::size_t>(width, 1), cfg);
  for (std::size_t i = 0; i < ws.size(); ++i) AccumulateProduct(ws[i], xs[i], acc);
  return TrimTo(NormalizeDigits(acc, cfg), std::max<std::size_t>(width, 1), cfg);
}

}  // namespace rnsim
