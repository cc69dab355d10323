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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rnsim/analog_core.hpp"
#include "rnsim/dataset.hpp"
#include "rnsim/energy.hpp"
#include "rnsim/experiments.hpp"
#include "rnsim/hybrid.hpp"
#include "rnsim/nn.hpp"
#include "rnsim/rns.hpp"
#include "rnsim/rrns.hpp"

namespace rnsim {
namespace {

namespace fs = std::filesystem;

// Tolerances and budgets.
constexpr std::uint64_t kCrtRandomCases = 100000;
constexpr double kCrtSeconds = 10.0;
constexpr std::size_t kTileH = 128;
constexpr std::uint64_t kTilesPerPreset = 1000;
constexpr double kTileSeconds = 60.0;
constexpr std::uint64_t kDotTrials = 10000;
constexpr double kMinMedianRatio = 10.0;
constexpr double kDotSeconds = 30.0;
constexpr double kMinAdcRatio = 1e6;
constexpr double kAdcGrowthTarget = 4.0;
constexpr double kAdcGrowthTolerance = 0.05;
constexpr std::uint64_t kMcTrials = 1000000;
constexpr double kMcSigmas = 3.0;
constexpr double kRrnsSeconds = 120.0;
constexpr std::uint64_t kDecoderTrials = 100000;
constexpr double kPerrLimitTolerance = 1e-12;
constexpr std::uint64_t kHybridCases = 10000;
constexpr double kHybridSeconds = 60.0;
constexpr double kMinTrainAccuracy = 0.95;
constexpr std::size_t kTrainSteps = 500;
constexpr double kMinLpGap = 0.05;
constexpr double kLearningSeconds = 300.0;
constexpr std::uint64_t kSeed = 20260101;

unsigned Workers() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

struct Verdict {
  bool pass = true;
  std::string detail;
};

class Timer {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string Fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void Note(Verdict& v, bool ok, const std::string& what) {
  if (!ok) v.pass = false;
  if (!v.detail.empty()) v.detail += "; ";
  v.detail += (ok ? "" : "[x] ") + what;
}

void Budget(Verdict& v, const Timer& t, double limit) {
  const double s = t.Seconds();
  Note(v, s < limit, Fmt("%.1f s of %.0f s", s, limit));
}

BigInt RandomBelow(const BigInt& bound, std::mt19937_64& rng) {
  BigInt r = 0;
  for (BigInt b = bound; b > 0; b >>= 64) r = (r << 64) | BigInt(rng());
  return r % bound;
}

// 1. Forward/reverse conversion.
Verdict CrtRoundTrip() {
  Timer t;
  Verdict v;
  const ModuliSet small({3, 5, 7, 11, 13});
  const std::int64_t psi = (15015 - 1) / 2;
  std::uint64_t failures = 0, cases = 0;
  for (std::int64_t x = -psi; x <= psi; ++x, ++cases) {
    const ResidueVector rv = ForwardConvert(x, small);
    for (std::size_t i = 0; i < small.size(); ++i) {
      const std::int64_t m = static_cast<std::int64_t>(small.modulus(i));
      failures += static_cast<std::int64_t>(rv[i]) != ((x % m) + m) % m;
    }
    failures += CrtReconstruct(rv) != x;
  }
  Note(v, failures == 0, Fmt("exhaustive M=15015: %llu/%llu failures",
                             (unsigned long long)failures, (unsigned long long)cases));
  std::mt19937_64 rng(kSeed);
  for (const std::string& name : ModuliSet::PresetNames()) {
    const ModuliSet set = ModuliSet::Preset(name);
    const BigInt psi_big = (set.range() - 1) / 2;
    std::uint64_t f = 0;
    for (std::uint64_t c = 0; c < kCrtRandomCases; ++c) {
      const BigInt x = RandomBelow(2 * psi_big + 1, rng) - psi_big;
      const ResidueVector rv = ForwardConvert(x, set);
      for (std::size_t i = 0; i < set.size(); ++i) {
        const BigInt m = set.modulus(i);
        f += BigInt(rv[i]) != ((x % m) + m) % m;
      }
      f += CrtReconstruct(rv) != x;
    }
    Note(v, f == 0, Fmt("%s: %llu failures", name.c_str(), (unsigned long long)f));
  }
  Budget(v, t, kCrtSeconds);
  return v;
}

// 2. The RNS core returns exactly the HP core's integers.
Verdict RnsEqualsHp() {
  Timer t;
  Verdict v;
  for (const std::string& name : ModuliSet::PresetNames()) {
    const CoreConfig rns = CoreConfig::Rns(name, kTileH);
    const int b = rns.b_dac();
    const CoreConfig hp = CoreConfig::Hp(b, kTileH);
    std::mt19937_64 rng(kSeed + b);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<std::uint64_t> fails(kTilesPerPreset, 0);
    std::vector<std::vector<float>> ws(kTilesPerPreset), xs(kTilesPerPreset);
    for (std::uint64_t i = 0; i < kTilesPerPreset; ++i) {
      ws[i].resize(kTileH * kTileH);
      xs[i].resize(kTileH);
      for (auto& e : ws[i]) e = u(rng);
      for (auto& e : xs[i]) e = u(rng);
    }
    std::vector<std::thread> pool;
    const unsigned n = Workers();
    for (unsigned w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint64_t i = w; i < kTilesPerPreset; i += n) {
          const QuantizedMatrix qw = QuantizeRows(ws[i], kTileH, kTileH, b);
          const QuantizedVector qx = QuantizeSymmetric(xs[i], b);
          const TileOutput a = MvmRns(qw, qx, rns);
          const TileOutput c = MvmHp(qw, qx, hp);
          for (std::size_t r = 0; r < kTileH; ++r) {
            std::int64_t exact = 0;
            for (std::size_t j = 0; j < kTileH; ++j) exact += qw.row(r)[j] * qx.values[j];
            fails[i] += a.raw[r] != exact || c.raw[r] != exact;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    std::uint64_t f = 0;
    for (auto x : fails) f += x;
    Note(v, f == 0, Fmt("%s: %llu mismatched outputs", name.c_str(), (unsigned long long)f));
  }
  Budget(v, t, kTileSeconds);
  return v;
}

// 3. LP vs RNS dot-product error.
Verdict DotErrorRatio() {
  Timer t;
  Verdict v;
  DotErrorOptions opt;
  opt.h = kTileH;
  opt.b = 6;
  opt.trials = kDotTrials;
  opt.seed = kSeed;
  opt.threads = Workers();
  const std::vector<DotErrorRow> rows = RunDotError(opt);
  std::vector<double> lp, rns;
  std::uint64_t violations = 0;
  // Regenerating the vectors is not possible from the rows, so the bound is
  // checked against an independent worst case: every element off by half a
  // step in both operands of magnitude at most 1, plus FP32 rounding.
  const double step = 1.0 / MaxCode(opt.b);
  const double independent = opt.h * (step + step * step / 4.0) + 1e-5;
  for (const DotErrorRow& r : rows) {
    (r.core == CoreKind::kLp ? lp : rns).push_back(r.abs_error);
    if (r.core == CoreKind::kRns) {
      violations += r.abs_error > r.bound;
      violations += r.abs_error > independent;
    }
  }
  auto median = [](std::vector<double> x) {
    std::nth_element(x.begin(), x.begin() + x.size() / 2, x.end());
    return x[x.size() / 2];
  };
  const double ratio = median(lp) / median(rns);
  Note(v, lp.size() == kDotTrials && rns.size() == kDotTrials,
       Fmt("%zu LP and %zu RNS trials", lp.size(), rns.size()));
  Note(v, ratio >= kMinMedianRatio, Fmt("median LP/RNS = %.1f", ratio));
  Note(v, violations == 0, Fmt("%llu RNS bound violations", (unsigned long long)violations));
  Budget(v, t, kDotSeconds);
  return v;
}

// 4. Output widths and lost bits.
Verdict RangeTable() {
  Verdict v;
  const int b_out[] = {14, 16, 18, 20, 22};
  const int lost[] = {10, 11, 12, 13, 14};
  for (int b = 4; b <= 8; ++b) {
    const std::string name = "rns" + std::to_string(b);
    const ModuliSet set = ModuliSet::Preset(name);
    const RangeCheck rc = CheckRangeConstraint(b, b, kTileH, set);
    const int lp_lost = CoreConfig::Lp(b, kTileH).lost_bits();
    const bool ok = rc.b_out == b_out[b - 4] && rc.satisfied &&
                    set.log2_range() >= b_out[b - 4] && lp_lost == lost[b - 4] &&
                    lp_lost == rc.b_out - b;
    Note(v, ok, Fmt("%s b_out %d log2M %.2f lost %d", name.c_str(), rc.b_out,
                    set.log2_range(), lp_lost));
  }
  return v;
}

// 5. Converter energy.
Verdict EnergyScaling() {
  Verdict v;
  const ConverterParams params;
  const double ratio = AdcEnergy(22, params) / (3.0 * AdcEnergy(8, params));
  Note(v, ratio >= kMinAdcRatio, Fmt("E(22)/3E(8) = %.3g", ratio));
  double worst = 0.0;
  int worst_b = 0;
  for (int b = 10; b < 24; ++b) {
    const double g = AdcEnergy(b + 1, params) / AdcEnergy(b, params);
    const double dev = std::abs(g / kAdcGrowthTarget - 1.0);
    if (dev > worst) worst = dev, worst_b = b;
  }
  Note(v, worst <= kAdcGrowthTolerance,
       Fmt("worst growth deviation %.1f%% at b=%d", 100.0 * worst, worst_b));
  return v;
}

// 6. Distance distribution and outcome probabilities.
Verdict RrnsAnalytics() {
  Timer t;
  Verdict v;
  const RrnsConfig cfg({3, 5}, {7});
  // Distance of each codeword from the zero codeword, by enumeration.
  std::vector<std::uint64_t> hist(4, 0);
  for (std::uint64_t x = 0; x < 15; ++x) {
    int d = 0;
    for (std::uint64_t m : {3u, 5u, 7u}) d += x % m != 0;
    ++hist[d];
  }
  const bool enum_ok = hist == std::vector<std::uint64_t>{1, 0, 8, 6};
  bool closed_ok = true;
  BigInt sum = 0;
  for (int eta = 0; eta <= 3; ++eta) {
    closed_ok &= CodeDistance(cfg, eta) == hist[eta];
    sum += CodeDistance(cfg, eta);
  }
  Note(v, enum_ok && closed_ok && sum == 15,
       Fmt("D = (%llu,%llu,%llu,%llu), closed form %s, sum %s", (unsigned long long)hist[0],
           (unsigned long long)hist[1], (unsigned long long)hist[2],
           (unsigned long long)hist[3], closed_ok ? "agrees" : "differs", sum.str().c_str()));
  for (double p : {0.01, 0.05, 0.1}) {
    const ErrorProbabilities a = ComputeErrorProbabilities(cfg, p);
    MonteCarloOptions opt;
    opt.trials = kMcTrials;
    opt.seed = kSeed;
    opt.threads = Workers();
    const OutcomeCounts mc = MonteCarloOutcomes(cfg, p, opt);
    const double n = static_cast<double>(mc.trials);
    auto z = [&](double expect, std::uint64_t count) {
      const double sigma = std::sqrt(expect * (1.0 - expect) / n);
      const double diff = count / n - expect;
      return sigma > 0.0 ? diff / sigma : (diff == 0.0 ? 0.0 : INFINITY);
    };
    const double zc = z(a.p_c, mc.correct), zd = z(a.p_d, mc.detected), zu = z(a.p_u, mc.wrong);
    const bool ok = std::abs(zc) <= kMcSigmas && std::abs(zd) <= kMcSigmas &&
                    std::abs(zu) <= kMcSigmas;
    Note(v, ok, Fmt("p=%.2f z(c,d,u) = (%.1f, %.1f, %.1f)", p, zc, zd, zu));
  }
  Budget(v, t, kRrnsSeconds);
  return v;
}

// 7. Correction and detection guarantees.
Verdict DecoderGuarantees() {
  Verdict v;
  const std::vector<RrnsConfig> codes = {
      RrnsConfig({3, 5}, {7, 11}), RrnsConfig({3, 5}, {7, 11, 13}),
      RrnsConfig::FromPreset("rns4", 2), RrnsConfig::FromPreset("rns6", 3)};
  std::mt19937_64 rng(kSeed);
  for (const RrnsConfig& cfg : codes) {
    const int k = static_cast<int>(cfg.k()), t = k / 2;
    const std::size_t len = cfg.length();
    std::uint64_t uncorrected = 0, miscorrected = 0, heavy = 0;
    for (std::uint64_t trial = 0; trial < kDecoderTrials; ++trial) {
      const BigInt x = RandomBelow(cfg.legitimate_range(), rng);
      Codeword w = Encode(x, cfg);
      const int errors = 1 + static_cast<int>(rng() % k);
      std::vector<std::size_t> pos(len);
      for (std::size_t i = 0; i < len; ++i) pos[i] = i;
      std::shuffle(pos.begin(), pos.end(), rng);
      for (int e = 0; e < errors; ++e) {
        const std::uint64_t m = cfg.modulus(pos[e]);
        w.residues[pos[e]] = (w.residues[pos[e]] + 1 + rng() % (m - 1)) % m;
      }
      const DecodeOutcome out = MajorityDecode(w, cfg);
      if (errors <= t) {
        uncorrected += !(out.is_value() && out.value == x);
      } else {
        ++heavy;
        miscorrected += out.is_value() && out.value != x;
      }
    }
    Note(v, uncorrected == 0 && miscorrected == 0,
         Fmt("%s: %llu uncorrected, %llu of %llu heavy patterns decoded wrong",
             cfg.ToString().c_str(), (unsigned long long)uncorrected,
             (unsigned long long)miscorrected, (unsigned long long)heavy));
  }
  return v;
}

// 8. Output error probability trends.
Verdict PerrTrends() {
  Verdict v;
  std::vector<double> ps;
  for (double decade = 1e-4; decade < 1.0; decade *= 10) {
    for (double mant : {1.0, 2.0, 5.0}) {
      if (mant * decade <= 0.5) ps.push_back(mant * decade);
    }
  }
  const std::vector<int> ks = {0, 1, 2, 3};
  const std::vector<Attempts> rs = {Attempts::Finite(1), Attempts::Finite(2),
                                    Attempts::Finite(4), Attempts::Infinite()};
  std::uint64_t k_viol = 0, r_viol = 0, limit_viol = 0, points = 0;
  for (const std::string& preset : ModuliSet::PresetNames()) {
    const auto curve = ComputePerrCurve(preset, ps, ks, rs);
    auto at = [&](double p, int k, std::size_t ri) {
      for (const PerrCurvePoint& pt : curve) {
        if (pt.p == p && pt.k == k && pt.attempts == rs[ri]) return pt;
      }
      std::abort();
    };
    for (double p : ps) {
      for (int k : ks) {
        for (std::size_t ri = 0; ri < rs.size(); ++ri) {
          const PerrCurvePoint pt = at(p, k, ri);
          ++points;
          if (k > 0 && pt.p_err > at(p, k - 1, ri).p_err * (1 + 1e-12)) ++k_viol;
          if (ri > 0 && pt.p_err > at(p, k, ri - 1).p_err * (1 + 1e-12)) ++r_viol;
          if (rs[ri].infinite()) {
            const double pu = pt.probs.p_u, pc = pt.probs.p_c;
            limit_viol += std::abs(pt.p_err - pu / (pu + pc)) > kPerrLimitTolerance;
          }
        }
      }
    }
  }
  Note(v, k_viol == 0, Fmt("%llu of %llu points increase with k", (unsigned long long)k_viol,
                           (unsigned long long)points));
  Note(v, r_viol == 0, Fmt("%llu increase with R", (unsigned long long)r_viol));
  Note(v, limit_viol == 0, Fmt("%llu R=inf limit mismatches", (unsigned long long)limit_viol));
  return v;
}

// 9. Hybrid arithmetic against big integers.
Verdict HybridArithmetic() {
  Timer t;
  Verdict v;
  const ModuliSet rns4 = ModuliSet::Preset("rns4");
  const std::vector<HybridConfig> configs = {
      HybridConfig(ModuliSet({3, 5}), ModuliSet({7, 11})),
      HybridConfig(rns4, ChooseSecondaryModuli(rns4, rns4.range() * 64))};
  std::mt19937_64 rng(kSeed);
  for (const HybridConfig& cfg : configs) {
    const BigInt& mp = cfg.primary_range();
    std::uint64_t bad = 0;
    auto check = [&](const std::function<bool()>& f) {
      try {
        bad += !f();
      } catch (const Error&) {
        ++bad;
      }
    };
    auto power = [&](std::size_t d) {
      BigInt r = 1;
      for (std::size_t i = 0; i < d; ++i) r *= mp;
      return r;
    };
    for (std::uint64_t c = 0; c < kHybridCases; ++c) {
      const std::size_t da = 1 + rng() % 3, db = 1 + rng() % 3;
      const BigInt a = RandomBelow(power(da), rng), b = RandomBelow(power(db), rng);
      const HybridNumber ha = ToHybrid(a, da, cfg), hb = ToHybrid(b, db, cfg);
      check([&] { return FromHybrid(HybridAdd(ha, hb, cfg), cfg) == a + b; });
      check([&] { return FromHybrid(HybridMul(ha, hb, cfg), cfg) == a * b; });
      const std::size_t h = 1 + rng() % 4;
      std::vector<HybridNumber> ws, xs;
      BigInt expect = 0;
      for (std::size_t i = 0; i < h; ++i) {
        const BigInt w = RandomBelow(mp, rng), x = RandomBelow(mp, rng);
        ws.push_back(ToHybrid(w, 1, cfg));
        xs.push_back(ToHybrid(x, 1, cfg));
        expect += w * x;
      }
      check([&] { return FromHybrid(HybridDot(ws, xs, cfg), cfg) == expect; });
    }
    Note(v, bad == 0, Fmt("primary %s secondary %s: %llu of %llu wrong",
                          cfg.primary().ToString().c_str(), cfg.secondary().ToString().c_str(),
                          (unsigned long long)bad, (unsigned long long)(3 * kHybridCases)));
  }
  const HybridConfig& small = configs[0];
  std::uint64_t det_bad = 0, cap = 15 * 77;
  for (std::uint64_t x = 0; x < cap; ++x) {
    const CarrySplit s = SplitDigit(RawDigit(x, small), small);
    det_bad += CrtReconstructUnsigned(s.remainder.primary) != x % 15 ||
               CrtReconstructUnsigned(s.quotient_secondary) != x / 15 ||
               s.carry != (x >= 15);
  }
  Note(v, det_bad == 0, Fmt("overflow detector: %llu of %llu wrong",
                            (unsigned long long)det_bad, (unsigned long long)cap));
  Budget(v, t, kHybridSeconds);
  return v;
}

std::optional<double> MnistTrend(Verdict& v);

// 10. Desk-scale learning.
Verdict Learning() {
  Timer t;
  Verdict v;
  const Dataset data = SynthDataset(SynthKind::kBlobs, 1024, kSeed, 4.0);
  auto train = [&](std::optional<CoreConfig> core, Model& m) {
    TrainOptions o;
    o.steps = kTrainSteps;
    o.batch_size = 32;
    o.seed = kSeed;
    o.sgd.lr = 0.1f;
    o.exec.core = core;
    return Train(m, data, o);
  };
  Model rns_model(ModelSpec::Mlp(2, 16, 2), kSeed);
  Model hp_model(ModelSpec::Mlp(2, 16, 2), kSeed);
  Model lp_model(ModelSpec::Mlp(2, 16, 2), kSeed);
  const TrainReport rns = train(CoreConfig::Rns("rns7", kTileH), rns_model);
  const TrainReport hp = train(CoreConfig::Hp(7, kTileH), hp_model);
  const TrainReport lp = train(CoreConfig::Lp(4, kTileH), lp_model);
  Note(v, rns.train_accuracy >= kMinTrainAccuracy,
       Fmt("RNS accuracy %.4f after %zu steps", rns.train_accuracy, kTrainSteps));
  const bool exact = rns.losses == hp.losses && rns_model.params() == hp_model.params();
  Note(v, exact, exact ? "RNS and HP runs bit-identical" : "RNS and HP runs differ");
  Note(v, rns.train_accuracy - lp.train_accuracy >= kMinLpGap,
       Fmt("LP b=4 accuracy %.4f", lp.train_accuracy));
  if (!MnistTrend(v)) Note(v, true, "no MNIST files, trend check skipped");
  Budget(v, t, kLearningSeconds);
  return v;
}

// Accuracy non-increasing in h at fixed b, with MNIST from RNSIM_MNIST_DIR.
std::optional<double> MnistTrend(Verdict& v) {
  const char* dir = std::getenv("RNSIM_MNIST_DIR");
  if (!dir) return std::nullopt;
  const fs::path images = fs::path(dir) / "train-images-idx3-ubyte";
  const fs::path labels = fs::path(dir) / "train-labels-idx1-ubyte";
  if (!fs::exists(images) || !fs::exists(labels)) return std::nullopt;
  const Dataset all = LoadIdxDataset(images.string(), labels.string());
  const Dataset train = all.Slice(0, std::min<std::size_t>(all.size(), 4000));
  const Dataset test = all.Slice(train.size(), std::min<std::size_t>(1000, all.size() - train.size()));
  Model m(ModelSpec::SmallCnn(1, 28, 28, 10), kSeed);
  TrainOptions o;
  o.steps = 400;
  o.batch_size = 32;
  o.seed = kSeed;
  o.sgd.lr = 0.05f;
  Train(m, train, o);
  std::string trend;
  double prev = 2.0;
  bool ok = true;
  for (std::size_t h : {8u, 32u, 128u}) {
    ExecConfig exec;
    exec.core = CoreConfig::Lp(6, h);
    const double acc = Evaluate(m, test, exec);
    ok &= acc <= prev;
    prev = acc;
    trend += Fmt(" h=%zu:%.3f", h, acc);
  }
  Note(v, ok, "MNIST LP b=6" + trend);
  return prev;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 11. verify artifacts are byte-identical across runs and thread counts.
Verdict Determinism() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "rnsim_acceptance";
  fs::remove_all(root);
  const unsigned threads[] = {1, 1, Workers() > 1 ? Workers() : 4};
  std::vector<fs::path> dirs;
  for (std::size_t i = 0; i < 3; ++i) {
    RunSettings s;
    s.experiment = "verify";
    s.seed = kSeed;
    s.threads = threads[i];
    s.out_dir = root / ("run" + std::to_string(i));
    std::ostringstream sink;
    try {
      RunExperiment(s, sink);
    } catch (const Error& e) {
      Note(v, false, std::string("verify failed: ") + e.what());
    }
    dirs.push_back(s.out_dir);
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    ++files;
    const std::string a = Slurp(entry.path());
    for (std::size_t i = 1; i < dirs.size(); ++i) {
      differing += a != Slurp(dirs[i] / entry.path().filename());
    }
  }
  for (std::size_t i = 1; i < dirs.size(); ++i) {
    differing += static_cast<std::size_t>(
        std::distance(fs::directory_iterator(dirs[i]), fs::directory_iterator{})) != files;
  }
  Note(v, files > 0 && differing == 0,
       Fmt("%zu artifacts, threads 1/1/%u, %zu differ", files, threads[2], differing));
  fs::remove_all(root);
  return v;
}

}  // namespace
}  // namespace rnsim

int main() {
  using namespace rnsim;
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const Criterion criteria[] = {
      {"CRT round trip", CrtRoundTrip},
      {"RNS core equals HP core", RnsEqualsHp},
      {"LP vs RNS dot-product error", DotErrorRatio},
      {"output width table", RangeTable},
      {"converter energy", EnergyScaling},
      {"RRNS analytics vs brute force", RrnsAnalytics},
      {"decoder guarantees", DecoderGuarantees},
      {"p_err trends", PerrTrends},
      {"hybrid arithmetic", HybridArithmetic},
      {"desk-scale learning", Learning},
      {"determinism", Determinism},
  };
  int failed = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", index, c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria failed\n", failed, index);
  return failed == 0 ? 0 : 1;
}
