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

#include "rnsim/analog_core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "rnsim/csv.hpp"
#include "rnsim/parallel.hpp"

namespace rnsim {
namespace {

constexpr int kMaxOutputBits = 62;

int DotOutputBits(int b, std::size_t h) {
  return 2 * b + CeilLog2(static_cast<std::uint64_t>(h)) - 1;
}

void CheckBits(int b, std::size_t h) {
  if (b < 2 || h == 0 || DotOutputBits(b, h) > kMaxOutputBits) {
    std::ostringstream msg;
    msg << "unsupported precision b=" << b << " h=" << h;
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
}

void CheckOperands(const QuantizedMatrix& w, const QuantizedVector& x,
                   const CoreConfig& cfg) {
  if (w.cols != x.values.size() || w.values.size() != w.rows * w.cols ||
      w.scales.size() != w.rows) {
    throw Error(ErrorCode::kShapeMismatch, "matrix and vector shapes disagree");
  }
  if (w.cols > cfg.h() || w.rows > cfg.h()) {
    std::ostringstream msg;
    msg << w.rows << "x" << w.cols << " operand exceeds tile size " << cfg.h();
    throw Error(ErrorCode::kShapeMismatch, msg.str());
  }
  if (w.bits != cfg.b_dac() || x.bits != cfg.b_dac()) {
    throw Error(ErrorCode::kPrecisionMismatch,
                "operands must be quantized to the DAC precision");
  }
  const std::int64_t q = MaxCode(cfg.b_dac());
  auto in_range = [q](std::int64_t v) { return v >= -q && v <= q; };
  if (!std::all_of(w.values.begin(), w.values.end(), in_range) ||
      !std::all_of(x.values.begin(), x.values.end(), in_range)) {
    throw Error(ErrorCode::kOutOfRange, "quantized code outside symmetric range");
  }
}

std::vector<std::int64_t> ExactRows(const QuantizedMatrix& w,
                                    const QuantizedVector& x) {
  std::vector<std::int64_t> out(w.rows, 0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    auto row = w.row(r);
    std::int64_t acc = 0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x.values[c];
    out[r] = acc;
  }
  return out;
}

void Rescale(TileOutput& t, const QuantizedMatrix& w, const QuantizedVector& x) {
  const double qq = double(MaxCode(w.bits)) * double(MaxCode(x.bits));
  t.scales.resize(t.raw.size());
  t.as_float.resize(t.raw.size());
  for (std::size_t r = 0; r < t.raw.size(); ++r) {
    const double factor = double(w.scales[r]) * double(x.scale) / qq;
    t.scales[r] = static_cast<float>(factor);
    t.as_float[r] = static_cast<float>(double(t.raw[r]) * factor);
  }
}

std::uint64_t Mod(std::int64_t v, std::uint64_t m) {
  const auto sm = static_cast<std::int64_t>(m);
  const std::int64_t r = v % sm;
  return static_cast<std::uint64_t>(r < 0 ? r + sm : r);
}

}  // namespace

std::string_view CoreKindName(CoreKind kind) {
  switch (kind) {
    case CoreKind::kLp: return "LP";
    case CoreKind::kHp: return "HP";
    case CoreKind::kRns: return "RNS";
  }
  return "?";
}

CoreKind ParseCoreKind(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "lp") return CoreKind::kLp;
  if (lower == "hp") return CoreKind::kHp;
  if (lower == "rns") return CoreKind::kRns;
  throw Error(ErrorCode::kInvalidArgument, "unknown core kind: " + std::string(name));
}

CoreConfig::CoreConfig(CoreKind kind, int b_dac, int b_adc, std::size_t h,
                       std::optional<ModuliSet> moduli)
    : kind_(kind),
      b_dac_(b_dac),
      b_adc_(b_adc),
      b_out_(DotOutputBits(b_dac, h)),
      h_(h),
      moduli_(std::move(moduli)) {}

CoreConfig CoreConfig::Lp(int b, std::size_t h) {
  CheckBits(b, h);
  return CoreConfig(CoreKind::kLp, b, b, h, std::nullopt);
}

CoreConfig CoreConfig::Hp(int b, std::size_t h) {
  CheckBits(b, h);
  return CoreConfig(CoreKind::kHp, b, DotOutputBits(b, h), h, std::nullopt);
}

CoreConfig CoreConfig::Rns(const ModuliSet& moduli, std::size_t h) {
  const int b = moduli.residue_bits();
  CheckBits(b, h);
  const RangeCheck rc = CheckRangeConstraint(b, b, h, moduli);
  if (!rc.satisfied) {
    std::ostringstream msg;
    msg << moduli.ToString() << " covers " << moduli.log2_range()
        << " bits, tile needs " << rc.b_out;
    throw Error(ErrorCode::kRangeViolation, msg.str());
  }
  return CoreConfig(CoreKind::kRns, b, b, h, moduli);
}

CoreConfig CoreConfig::Rns(std::string_view preset, std::size_t h) {
  return Rns(ModuliSet::Preset(preset), h);
}

CoreConfig CoreConfig::Make(CoreKind kind, int b, std::size_t h) {
  switch (kind) {
    case CoreKind::kLp: return Lp(b, h);
    case CoreKind::kHp: return Hp(b, h);
    case CoreKind::kRns: return Rns("rns" + std::to_string(b), h);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown core kind");
}

std::int64_t CoreConfig::output_limit() const {
  switch (kind_) {
    case CoreKind::kLp: return MaxCode(b_adc_) << lost_bits();
    case CoreKind::kHp: return MaxCode(b_out_);
    case CoreKind::kRns: {
      const BigInt cap = BigInt(1) << kMaxOutputBits;
      const BigInt& psi = moduli_->half_range();
      return (psi < cap ? psi : cap).convert_to<std::int64_t>();
    }
  }
  return 0;
}

std::string CoreConfig::ToString() const {
  std::ostringstream os;
  os << CoreKindName(kind_) << "(b_dac=" << b_dac_ << ", b_adc=" << b_adc_
     << ", b_out=" << b_out_ << ", h=" << h_;
  if (moduli_) os << ", moduli=" << moduli_->ToString();
  os << ")";
  return os.str();
}

std::int64_t MaxCode(int b) { return (std::int64_t{1} << (b - 1)) - 1; }

QuantizedVector QuantizeSymmetric(std::span<const float> v, int b) {
  if (b < 2 || b > 32) {
    throw Error(ErrorCode::kInvalidArgument, "quantization needs 2 <= b <= 32");
  }
  float scale = 0.0f;
  for (float e : v) {
    if (!std::isfinite(e)) {
      throw Error(ErrorCode::kNonFiniteInput, "cannot quantize non-finite value");
    }
    scale = std::max(scale, std::fabs(e));
  }
  if (scale == 0.0f) scale = 1.0f;
  const double q = double(MaxCode(b));
  QuantizedVector out;
  out.scale = scale;
  out.bits = b;
  out.values.reserve(v.size());
  for (float e : v) {
    out.values.push_back(static_cast<std::int64_t>(std::round(double(e) / scale * q)));
  }
  return out;
}

std::vector<float> Dequantize(const QuantizedVector& q) {
  const double factor = double(q.scale) / double(MaxCode(q.bits));
  std::vector<float> out;
  out.reserve(q.values.size());
  for (auto v : q.values) out.push_back(static_cast<float>(double(v) * factor));
  return out;
}

QuantizedMatrix QuantizeRows(std::span<const float> w, std::size_t rows,
                             std::size_t cols, int b) {
  if (w.size() != rows * cols) {
    throw Error(ErrorCode::kShapeMismatch, "matrix data does not match shape");
  }
  QuantizedMatrix out;
  out.rows = rows;
  out.cols = cols;
  out.bits = b;
  out.values.reserve(rows * cols);
  out.scales.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    QuantizedVector q = QuantizeSymmetric(w.subspan(r * cols, cols), b);
    out.values.insert(out.values.end(), q.values.begin(), q.values.end());
    out.scales.push_back(q.scale);
  }
  return out;
}

std::int64_t AdcCapture(std::int64_t o, int shift, int b_adc) {
  const std::int64_t limit = MaxCode(b_adc);
  std::int64_t mag = o < 0 ? -o : o;
  if (shift > 0) mag = (mag + (std::int64_t{1} << (shift - 1))) >> shift;
  std::int64_t code = std::min(mag, limit);
  if (o < 0) code = -code;
  return code * (std::int64_t{1} << shift);
}

TileOutput MvmHp(const QuantizedMatrix& w, const QuantizedVector& x,
                 const CoreConfig& cfg) {
  if (cfg.kind() != CoreKind::kHp) {
    throw Error(ErrorCode::kInvalidArgument, "MvmHp needs an HP core");
  }
  CheckOperands(w, x, cfg);
  TileOutput out;
  out.raw = ExactRows(w, x);
  Rescale(out, w, x);
  return out;
}

TileOutput MvmLp(const QuantizedMatrix& w, const QuantizedVector& x,
                 const CoreConfig& cfg) {
  if (cfg.kind() != CoreKind::kLp) {
    throw Error(ErrorCode::kInvalidArgument, "MvmLp needs an LP core");
  }
  CheckOperands(w, x, cfg);
  TileOutput out;
  out.raw = ExactRows(w, x);
  for (auto& o : out.raw) o = AdcCapture(o, cfg.lost_bits(), cfg.b_adc());
  Rescale(out, w, x);
  return out;
}

std::vector<std::vector<std::uint64_t>> RnsResidueMvm(const QuantizedMatrix& w,
                                                      const QuantizedVector& x,
                                                      const ModuliSet& set) {
  if (w.cols != x.values.size() || w.values.size() != w.rows * w.cols) {
    throw Error(ErrorCode::kShapeMismatch, "matrix and vector shapes disagree");
  }
  std::vector<std::vector<std::uint64_t>> out(set.size());
  std::vector<std::uint64_t> xr(w.cols);
  std::vector<std::uint64_t> wr(w.values.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::uint64_t m = set.modulus(i);
    for (std::size_t c = 0; c < w.cols; ++c) xr[c] = Mod(x.values[c], m);
    for (std::size_t j = 0; j < wr.size(); ++j) wr[j] = Mod(w.values[j], m);
    out[i].resize(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const std::uint64_t* row = wr.data() + r * w.cols;
      unsigned __int128 acc = 0;
      for (std::size_t c = 0; c < w.cols; ++c) {
        acc += static_cast<unsigned __int128>(row[c] * xr[c]);
      }
      out[i][r] = static_cast<std::uint64_t>(acc % m);
    }
  }
  return out;
}

std::vector<std::int64_t> RnsReconstructRows(
    const std::vector<std::vector<std::uint64_t>>& residues,
    const ModuliSet& set) {
  if (residues.size() != set.size()) {
    throw Error(ErrorCode::kLengthMismatch, "one residue row per modulus expected");
  }
  const std::size_t rows = residues.empty() ? 0 : residues[0].size();
  std::vector<std::int64_t> out(rows);
  std::vector<std::uint64_t> r(set.size());
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t i = 0; i < set.size(); ++i) r[i] = residues[i].at(row);
    if (set.fits_int64()) {
      out[row] = set.ReconstructSignedFast(r);
    } else {
      const BigInt v = CrtReconstruct(ResidueVector(set, r));
      if (v > std::numeric_limits<std::int64_t>::max() ||
          v < std::numeric_limits<std::int64_t>::min()) {
        throw Error(ErrorCode::kOutOfRange, "reconstructed output exceeds 64 bits");
      }
      out[row] = v.convert_to<std::int64_t>();
    }
  }
  return out;
}

TileOutput MvmRns(const QuantizedMatrix& w, const QuantizedVector& x,
                  const CoreConfig& cfg) {
  if (cfg.kind() != CoreKind::kRns) {
    throw Error(ErrorCode::kInvalidArgument, "MvmRns needs an RNS core");
  }
  CheckOperands(w, x, cfg);
  const ModuliSet& set = *cfg.moduli();
  TileOutput out;
  out.raw = RnsReconstructRows(RnsResidueMvm(w, x, set), set);
  Rescale(out, w, x);
  return out;
}

TileOutput Mvm(const QuantizedMatrix& w, const QuantizedVector& x,
               const CoreConfig& cfg) {
  switch (cfg.kind()) {
    case CoreKind::kLp: return MvmLp(w, x, cfg);
    case CoreKind::kHp: return MvmHp(w, x, cfg);
    case CoreKind::kRns: return MvmRns(w, x, cfg);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown core kind");
}

CorruptedOutput CorruptOutputs(const TileOutput& t, const CoreConfig& cfg,
                               double p_err, std::mt19937_64& rng) {
  if (!(p_err >= 0.0 && p_err <= 1.0)) {
    throw Error(ErrorCode::kInvalidProbability, "p_err must lie in [0, 1]");
  }
  CorruptedOutput out{t, std::vector<bool>(t.raw.size(), false)};
  if (p_err == 0.0) return out;
  std::bernoulli_distribution hit(p_err);
  // LP outputs can only land on multiples of the dropped LSB weight.
  const int shift = cfg.lost_bits();
  const std::int64_t limit = cfg.output_limit() >> shift;
  std::uniform_int_distribution<std::int64_t> value(-limit, limit);
  for (std::size_t i = 0; i < t.raw.size(); ++i) {
    if (!hit(rng)) continue;
    out.corrupted[i] = true;
    out.output.raw[i] = value(rng) * (std::int64_t{1} << shift);
    out.output.as_float[i] =
        static_cast<float>(double(out.output.raw[i]) * double(t.scales[i]));
  }
  return out;
}

std::uint64_t RingOscillatorModulo(std::uint64_t a, std::uint64_t n) {
  if (n < 3 || n % 2 == 0) {
    throw Error(ErrorCode::kInvalidInverterCount,
                "ring needs an odd number of at least 3 inverters, got " +
                    std::to_string(n));
  }
  // Stage i inverts stage i-1. Alternating levels leave exactly one stage
  // whose output disagrees with its input; that stage switches next.
  std::vector<std::uint8_t> level(n);
  for (std::uint64_t i = 0; i < n; ++i) level[i] = i % 2;
  auto unstable = [&](std::uint64_t i) {
    return level[i] == level[(i + n - 1) % n];
  };
  std::uint64_t edge = 0;
  const std::uint64_t start = edge;
  for (std::uint64_t t = 0; t < a; ++t) {
    level[edge] ^= 1;
    edge = (edge + 1) % n;
    if (!unstable(edge)) {
      throw Error(ErrorCode::kNumericDrift, "ring oscillator lost its edge");
    }
  }
  return (edge + n - start) % n;
}

std::uint64_t PhaseShifterModularDot(std::span<const std::uint64_t> w,
                                     std::span<const std::uint64_t> x,
                                     std::uint64_t m, int digit_count) {
  if (w.size() != x.size()) {
    throw Error(ErrorCode::kLengthMismatch, "operand lengths differ");
  }
  if (m < 2) throw Error(ErrorCode::kInvalidModulus, "modulus must be >= 2");
  if (digit_count < 1 || digit_count > 62) {
    throw Error(ErrorCode::kInvalidArgument, "digit count must be in [1, 62]");
  }
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double phase = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] >> digit_count) {
      throw Error(ErrorCode::kDigitOverflow,
                  std::to_string(w[i]) + " needs more than " +
                      std::to_string(digit_count) + " digits");
    }
    for (int d = 0; d < digit_count; ++d) {
      if (!((w[i] >> d) & 1)) continue;
      phase += double(x[i]) * double(std::uint64_t{1} << d) * kTwoPi / double(m);
      phase = std::fmod(phase, kTwoPi);
    }
  }
  const double scaled = phase * double(m) / kTwoPi;
  const double nearest = std::round(scaled);
  if (std::fabs(scaled - nearest) > kPhaseTolerance) {
    throw Error(ErrorCode::kNumericDrift, "phase is not a whole multiple of 2pi/m");
  }
  return static_cast<std::uint64_t>(nearest) % m;
}

double DotQuantizationBound(std::span<const float> w, std::span<const float> x,
                            int b) {
  if (w.size() != x.size()) {
    throw Error(ErrorCode::kLengthMismatch, "operand lengths differ");
  }
  double sw = 0.0, sx = 0.0;
  for (float v : w) sw = std::max(sw, double(std::fabs(v)));
  for (float v : x) sx = std::max(sx, double(std::fabs(v)));
  if (sw == 0.0) sw = 1.0;
  if (sx == 0.0) sx = 1.0;
  const double q = double(MaxCode(b));
  const double dw = sw / q / 2, dx = sx / q / 2;
  double quant = 0.0, magnitude = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double aw = std::fabs(double(w[i])), ax = std::fabs(double(x[i]));
    quant += aw * dx + dw * (ax + dx);
    magnitude += (aw + dw) * (ax + dx);
  }
  return quant + magnitude * std::ldexp(1.0, -23);
}

std::vector<DotErrorRow> RunDotError(const DotErrorOptions& options) {
  std::vector<CoreConfig> cores;
  for (CoreKind kind : options.cores) {
    cores.push_back(CoreConfig::Make(kind, options.b, options.h));
  }
  const std::size_t per_trial = cores.size();
  std::vector<DotErrorRow> rows(options.trials * per_trial);
  ParallelFor(options.trials, options.threads, [&](std::size_t trial) {
    std::mt19937_64 rng = SubstreamRng(options.seed, trial);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    std::vector<float> w(options.h), x(options.h);
    for (auto& v : w) v = dist(rng);
    for (auto& v : x) v = dist(rng);
    double exact = 0.0;
    for (std::size_t i = 0; i < options.h; ++i) exact += double(w[i]) * double(x[i]);
    const double bound = DotQuantizationBound(w, x, options.b);
    for (std::size_t c = 0; c < per_trial; ++c) {
      const CoreConfig& cfg = cores[c];
      QuantizedMatrix qw = QuantizeRows(w, 1, options.h, cfg.b_dac());
      QuantizedVector qx = QuantizeSymmetric(x, cfg.b_dac());
      TileOutput t = Mvm(qw, qx, cfg);
      DotErrorRow& row = rows[trial * per_trial + c];
      row.trial = trial;
      row.core = cfg.kind();
      row.b = options.b;
      row.h = options.h;
      row.abs_error = std::fabs(double(t.as_float[0]) - exact);
      row.bound = bound;
    }
  });
  return rows;
}

void WriteDotErrorCsv(std::ostream& os, std::span<const DotErrorRow> rows) {
  os << "trial,coreKind,b,h,absError\n";
  for (const auto& r : rows) {
    os << r.trial << ',' << CoreKindName(r.core) << ',' << r.b << ',' << r.h << ','
       << FormatDouble(r.abs_error) << '\n';
  }
}

}  // namespace rnsim
