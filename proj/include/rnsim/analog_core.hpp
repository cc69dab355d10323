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

// Bit-accurate tile cores: low-precision fixed point (ADC keeps the MSBs),
// high-precision fixed point (ADC keeps everything) and RNS (one modular MVM
// per modulus, then CRT). Also symmetric quantization, Bernoulli output
// corruption and two behavioral analog-modulo models.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rnsim/rns.hpp"

namespace rnsim {

enum class CoreKind { kLp, kHp, kRns };

std::string_view CoreKindName(CoreKind kind);  // "LP", "HP", "RNS"
CoreKind ParseCoreKind(std::string_view name);  // case-insensitive

class CoreConfig {
 public:
  // b-bit DACs and ADC; the ADC drops b_out - b LSBs.
  static CoreConfig Lp(int b, std::size_t h);
  // b-bit DACs, ADC as wide as the dot product.
  static CoreConfig Hp(int b, std::size_t h);
  // Converters sized to the widest residue. Throws kRangeViolation when
  // log2 M < b_out.
  static CoreConfig Rns(const ModuliSet& moduli, std::size_t h);
  static CoreConfig Rns(std::string_view preset, std::size_t h);
  // Convenience used by sweeps: RNS takes the preset "rns<b>".
  static CoreConfig Make(CoreKind kind, int b, std::size_t h);

  CoreKind kind() const { return kind_; }
  int b_dac() const { return b_dac_; }
  int b_adc() const { return b_adc_; }
  int b_out() const { return b_out_; }
  std::size_t h() const { return h_; }
  const std::optional<ModuliSet>& moduli() const { return moduli_; }
  // Bits the LP ADC discards; 0 for the other kinds.
  int lost_bits() const { return kind_ == CoreKind::kLp ? b_out_ - b_adc_ : 0; }

  // Largest magnitude an output can report.
  std::int64_t output_limit() const;

  std::string ToString() const;

 private:
  CoreConfig(CoreKind kind, int b_dac, int b_adc, std::size_t h,
             std::optional<ModuliSet> moduli);

  CoreKind kind_;
  int b_dac_;
  int b_adc_;
  int b_out_;
  std::size_t h_;
  std::optional<ModuliSet> moduli_;
};

// 2^(b-1) - 1, the largest symmetric b-bit code.
std::int64_t MaxCode(int b);

struct QuantizedVector {
  std::vector<std::int64_t> values;
  float scale = 1.0f;
  int bits = 0;
};

// Row-major, one scale per row.
struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> values;
  std::vector<float> scales;
  int bits = 0;

  std::span<const std::int64_t> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

// scale = max|v| (1 for an all-zero vector); q = round(v / scale * MaxCode(b)),
// halves away from zero. Throws kNonFiniteInput, kInvalidArgument for b < 2.
QuantizedVector QuantizeSymmetric(std::span<const float> v, int b);
std::vector<float> Dequantize(const QuantizedVector& q);

// Each row quantized on its own.
QuantizedMatrix QuantizeRows(std::span<const float> w, std::size_t rows,
                             std::size_t cols, int b);

struct TileOutput {
  std::vector<std::int64_t> raw;
  // s_w[r] * s_x / (MaxCode(b_w) * MaxCode(b_x)), so as_float = raw * scales.
  std::vector<float> scales;
  std::vector<float> as_float;
};

// Shape and precision checks shared by the cores: kShapeMismatch,
// kPrecisionMismatch, kOutOfRange.
TileOutput MvmHp(const QuantizedMatrix& w, const QuantizedVector& x,
                 const CoreConfig& cfg);
TileOutput MvmLp(const QuantizedMatrix& w, const QuantizedVector& x,
                 const CoreConfig& cfg);
TileOutput MvmRns(const QuantizedMatrix& w, const QuantizedVector& x,
                  const CoreConfig& cfg);
// Dispatches on cfg.kind().
TileOutput Mvm(const QuantizedMatrix& w, const QuantizedVector& x,
               const CoreConfig& cfg);

// LP ADC on one exact output: round(o / 2^shift) halves away from zero,
// clamped to +-MaxCode(b_adc), returned re-expanded by 2^shift.
std::int64_t AdcCapture(std::int64_t o, int shift, int b_adc);

// The residue stage of the RNS core without the range check:
// out[i][r] = |<w_r, x>|_{m_i}.
std::vector<std::vector<std::uint64_t>> RnsResidueMvm(
    const QuantizedMatrix& w, const QuantizedVector& x, const ModuliSet& set);
// Signed CRT of each row's residues.
std::vector<std::int64_t> RnsReconstructRows(
    const std::vector<std::vector<std::uint64_t>>& residues,
    const ModuliSet& set);

struct CorruptedOutput {
  TileOutput output;
  std::vector<bool> corrupted;
};

// Each element independently, with probability p_err, takes a uniform value
// in the core's output range. Throws kInvalidProbability.
CorruptedOutput CorruptOutputs(const TileOutput& t, const CoreConfig& cfg,
                               double p_err, std::mt19937_64& rng);

// Ring of n inverters, one stage switching per propagation delay. Runs for
// `a` delays and returns how many stages the edge advanced, mod n.
// Throws kInvalidInverterCount for even n or n < 3.
std::uint64_t RingOscillatorModulo(std::uint64_t a, std::uint64_t n);

// Optical path of binary-weighted phase shifters: digit d of w_i, when set,
// adds x_i * 2^d * 2pi / m of phase. The wrapped total phase, rescaled by
// m / 2pi, is the modular dot product. Throws kDigitOverflow when some
// w_i >= 2^digit_count, kNumericDrift when the rescaled phase sits more than
// kPhaseTolerance from an integer.
std::uint64_t PhaseShifterModularDot(std::span<const std::uint64_t> w,
                                     std::span<const std::uint64_t> x,
                                     std::uint64_t m, int digit_count);
inline constexpr double kPhaseTolerance = 1e-6;

// Worst-case |<w, x> - <deq(q(w)), deq(q(x))>| for b-bit symmetric
// quantization, plus one FP32 rounding of the rescaled result.
double DotQuantizationBound(std::span<const float> w, std::span<const float> x,
                            int b);

struct DotErrorOptions {
  std::size_t h = 128;
  int b = 6;
  std::uint64_t trials = 10000;
  std::uint64_t seed = 1;
  std::vector<CoreKind> cores = {CoreKind::kLp, CoreKind::kRns};
  unsigned threads = 1;
};

struct DotErrorRow {
  std::uint64_t trial = 0;
  CoreKind core = CoreKind::kLp;
  int b = 0;
  std::size_t h = 0;
  double abs_error = 0.0;
  double bound = 0.0;  // DotQuantizationBound of the trial's vectors
};

// Random vector pairs uniform in [-1, 1]^h, one dot product per core each;
// error against the double-precision dot of the FP32 inputs.
std::vector<DotErrorRow> RunDotError(const DotErrorOptions& options);

// Columns: trial,coreKind,b,h,absError
void WriteDotErrorCsv(std::ostream& os, std::span<const DotErrorRow> rows);

}  // namespace rnsim
