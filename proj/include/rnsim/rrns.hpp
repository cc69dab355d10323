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

// Redundant RNS: RRNS(n+k, n) encoding, residue fault injection, majority
// logic decoding, and the closed-form error model (distance distributions,
// p_c / p_d / p_u, output error after R attempts) with a Monte Carlo check.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rnsim/rns.hpp"

namespace rnsim {

class RrnsConfig {
 public:
  // The first list carries information, the second is redundant. Throws
  // kNotCoprime / kInvalidModulus, or kInvalidRedundantModuli when some
  // n-subset of moduli has a product below the legitimate range (groups
  // would then reconstruct ambiguously).
  RrnsConfig(std::vector<std::uint64_t> non_redundant,
             std::vector<std::uint64_t> redundant);

  // Preset information moduli plus k generated redundant moduli.
  static RrnsConfig FromPreset(std::string_view preset, int k);

  std::size_t n() const { return data_->n; }
  std::size_t k() const { return data_->k; }
  std::size_t length() const { return data_->n + data_->k; }

  const ModuliSet& all_moduli() const { return data_->all; }
  const ModuliSet& information_moduli() const { return data_->info; }
  std::uint64_t modulus(std::size_t i) const { return data_->all.modulus(i); }
  // Product of the n information moduli.
  const BigInt& legitimate_range() const { return data_->info.range(); }

  int correction_capability() const { return static_cast<int>(k() / 2); }
  int detection_capability() const { return static_cast<int>(k()); }

  struct Group {
    std::vector<std::size_t> positions;
    ModuliSet moduli;
  };
  // The C(n+k, n) decoding groups in lexicographic order.
  std::span<const Group> groups() const { return data_->groups; }

  // True when the full product fits 63 bits; enables the fast decoder.
  bool fast_path() const { return data_->all.fits_int64(); }

  std::string ToString() const;

 private:
  struct Data {
    std::size_t n = 0;
    std::size_t k = 0;
    ModuliSet all;
    ModuliSet info;
    std::vector<Group> groups;
  };
  std::shared_ptr<const Data> data_;
};

// Smallest integers above max(base) that are co-prime with base and with one
// another.
std::vector<std::uint64_t> ChooseRedundantModuli(const ModuliSet& base, int k);

struct Codeword {
  std::vector<std::uint64_t> residues;
  bool operator==(const Codeword&) const = default;
};

// Throws kOutOfLegitimateRange unless 0 <= value < legitimate_range().
Codeword Encode(const BigInt& value, const RrnsConfig& cfg);

// Number of positions where the two words differ.
int HammingDistance(const Codeword& a, const Codeword& b);

struct InjectedCodeword {
  Codeword word;
  std::vector<bool> mask;
  int error_count = 0;
};

// Each residue independently, with probability p, takes a uniformly chosen
// different value in [0, m_i). Throws kInvalidProbability for p outside [0, 1].
InjectedCodeword InjectResidueErrors(const Codeword& word, const RrnsConfig& cfg,
                                     double p, std::mt19937_64& rng);

struct DecodeOutcome {
  enum class Kind { kValue, kDetectedUncorrectable };

  Kind kind = Kind::kDetectedUncorrectable;
  BigInt value = 0;
  int errors_corrected = 0;

  static DecodeOutcome Value(BigInt v, int corrected) {
    return {Kind::kValue, std::move(v), corrected};
  }
  static DecodeOutcome Detected() { return {}; }
  bool is_value() const { return kind == Kind::kValue; }
};

// Reconstructs one candidate per n-residue group, drops candidates outside the
// legitimate range, takes the most frequent one (smallest on ties) and
// accepts it iff its codeword lies within floor(k/2) of the received word.
DecodeOutcome MajorityDecode(const Codeword& word, const RrnsConfig& cfg);

// Closed-form distance distributions.
BigInt VectorDistance(const RrnsConfig& cfg, int eta);  // V_eta
BigInt Zeta(const RrnsConfig& cfg, int eta);
BigInt CodeDistance(const RrnsConfig& cfg, int eta);    // D_eta

// C(n+k, eta) p^eta (1-p)^(n+k-eta).
double ProbEtaErrors(const RrnsConfig& cfg, int eta, double p);

struct ErrorProbabilities {
  double p_c = 1.0;  // correctable
  double p_d = 0.0;  // detected, not correctable
  double p_u = 0.0;  // undetected
};

ErrorProbabilities ComputeErrorProbabilities(const RrnsConfig& cfg, double p);

// Number of decode attempts; Infinite() uses the closed-form limit.
class Attempts {
 public:
  static Attempts Finite(std::uint64_t r);
  static Attempts Infinite() { return Attempts(); }
  // "inf" or a positive integer; throws kInvalidArgument.
  static Attempts Parse(std::string_view text);

  bool infinite() const { return !count_.has_value(); }
  std::uint64_t count() const { return count_.value_or(0); }
  std::string ToString() const;

  bool operator==(const Attempts&) const = default;

 private:
  Attempts() = default;
  std::optional<std::uint64_t> count_;
};

// p_err(R) = 1 - p_c * sum_{r<R} p_d^r ; p_err(inf) = p_u / (p_u + p_c).
double OutputErrorProbability(const ErrorProbabilities& probs, Attempts attempts);

struct MonteCarloOptions {
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// Single-attempt outcome tallies of encode -> inject -> decode.
struct OutcomeCounts {
  std::uint64_t trials = 0;
  std::uint64_t correct = 0;   // decoded to the transmitted value
  std::uint64_t detected = 0;  // DetectedUncorrectable
  std::uint64_t wrong = 0;     // decoded to another value
};

OutcomeCounts MonteCarloOutcomes(const RrnsConfig& cfg, double p,
                                 const MonteCarloOptions& options);

struct MonteCarloEstimate {
  std::uint64_t trials = 0;
  std::uint64_t failures = 0;
  double rate = 0.0;
  double std_error = 0.0;  // binomial, sqrt(rate (1 - rate) / trials)
  double ci_low = 0.0;     // rate -/+ 3 std_error, clipped to [0, 1]
  double ci_high = 0.0;
};

// Retries while the decoder reports DetectedUncorrectable, up to R attempts
// (or until a non-detected outcome for R = inf, capped at 10^6 attempts).
// Counts trials whose final outcome is not the transmitted value.
MonteCarloEstimate MonteCarloPErr(const RrnsConfig& cfg, double p,
                                  Attempts attempts,
                                  const MonteCarloOptions& options);

// Trials are processed in fixed chunks, each with its own seeded substream.
inline constexpr std::uint64_t kMonteCarloChunk = 1u << 14;

struct PerrCurvePoint {
  double p = 0.0;
  int k = 0;
  Attempts attempts = Attempts::Finite(1);
  ErrorProbabilities probs;
  double p_err = 0.0;
};

std::vector<PerrCurvePoint> ComputePerrCurve(std::string_view preset,
                                             std::span<const double> ps,
                                             std::span<const int> ks,
                                             std::span<const Attempts> attempts);

// Columns: p,k,R,p_c,p_d,p_u,p_err
void WritePerrCurveCsv(std::ostream& os,
                       std::span<const PerrCurvePoint> points);

}  // namespace rnsim
