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

#include "rnsim/rrns.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rnsim/csv.hpp"
#include "rnsim/parallel.hpp"

namespace rnsim {
namespace {

std::vector<std::uint64_t> Concat(const std::vector<std::uint64_t>& a,
                                  const std::vector<std::uint64_t>& b) {
  std::vector<std::uint64_t> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void ForEachCombination(std::size_t n, std::size_t r,
                        const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> idx(r);
  std::iota(idx.begin(), idx.end(), 0);
  if (r > n) return;
  for (;;) {
    f(idx);
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
}

BigInt Binomial(std::size_t n, std::size_t r) {
  if (r > n) return 0;
  BigInt out = 1;
  for (std::size_t i = 0; i < r; ++i) {
    out *= (n - i);
    out /= (i + 1);
  }
  return out;
}

void CheckProbability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kInvalidProbability,
                "p = " + FormatDouble(p) + " outside [0, 1]");
  }
}

}  // namespace

RrnsConfig::RrnsConfig(std::vector<std::uint64_t> non_redundant,
                       std::vector<std::uint64_t> redundant) {
  if (non_redundant.empty()) {
    throw Error(ErrorCode::kInvalidModulus, "no information moduli");
  }
  ModuliSet all(Concat(non_redundant, redundant));
  ModuliSet info(non_redundant);

  // Every n-subset must span the legitimate range.
  std::vector<std::uint64_t> sorted(all.moduli().begin(), all.moduli().end());
  std::sort(sorted.begin(), sorted.end());
  BigInt smallest = 1;
  for (std::size_t i = 0; i < non_redundant.size(); ++i) smallest *= sorted[i];
  if (smallest < info.range()) {
    throw Error(ErrorCode::kInvalidRedundantModuli,
                "redundant moduli must not be smaller than information moduli");
  }

  auto data = std::make_shared<Data>(Data{non_redundant.size(),
                                          redundant.size(), all, info, {}});
  ForEachCombination(all.size(), non_redundant.size(),
                     [&](const std::vector<std::size_t>& pos) {
                       std::vector<std::uint64_t> ms;
                       for (std::size_t p : pos) ms.push_back(all.modulus(p));
                       data->groups.push_back(Group{pos, ModuliSet(ms)});
                     });
  data_ = std::move(data);
}

RrnsConfig RrnsConfig::FromPreset(std::string_view preset, int k) {
  ModuliSet base = ModuliSet::Preset(preset);
  return RrnsConfig({base.moduli().begin(), base.moduli().end()},
                    ChooseRedundantModuli(base, k));
}

std::string RrnsConfig::ToString() const {
  std::ostringstream os;
  os << "RRNS(" << length() << "," << n() << ") {";
  for (std::size_t i = 0; i < length(); ++i) {
    if (i == n()) {
      os << " | ";
    } else if (i > 0) {
      os << ',';
    }
    os << modulus(i);
  }
  os << '}';
  return os.str();
}

std::vector<std::uint64_t> ChooseRedundantModuli(const ModuliSet& base, int k) {
  if (k < 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 0");
  std::vector<std::uint64_t> taken(base.moduli().begin(), base.moduli().end());
  std::vector<std::uint64_t> out;
  std::uint64_t candidate = *std::max_element(taken.begin(), taken.end());
  while (out.size() < static_cast<std::size_t>(k)) {
    ++candidate;
    const bool coprime = std::all_of(taken.begin(), taken.end(), [&](auto m) {
      return std::gcd(m, candidate) == 1;
    });
    if (coprime) {
      taken.push_back(candidate);
      out.push_back(candidate);
    }
  }
  return out;
}

Codeword Encode(const BigInt& value, const RrnsConfig& cfg) {
  if (value < 0 || value >= cfg.legitimate_range()) {
    throw Error(ErrorCode::kOutOfLegitimateRange,
                value.str() + " not in [0, " + cfg.legitimate_range().str() +
                    ")");
  }
  Codeword out;
  out.residues.reserve(cfg.length());
  for (std::size_t i = 0; i < cfg.length(); ++i) {
    out.residues.push_back(
        BigInt(value % cfg.modulus(i)).convert_to<std::uint64_t>());
  }
  return out;
}

int HammingDistance(const Codeword& a, const Codeword& b) {
  if (a.residues.size() != b.residues.size()) {
    throw Error(ErrorCode::kLengthMismatch, "codeword lengths differ");
  }
  int d = 0;
  for (std::size_t i = 0; i < a.residues.size(); ++i) {
    d += a.residues[i] != b.residues[i];
  }
  return d;
}

InjectedCodeword InjectResidueErrors(const Codeword& word, const RrnsConfig& cfg,
                                     double p, std::mt19937_64& rng) {
  CheckProbability(p);
  InjectedCodeword out{word, std::vector<bool>(word.residues.size(), false), 0};
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t i = 0; i < word.residues.size(); ++i) {
    if (coin(rng) >= p) continue;
    const std::uint64_t m = cfg.modulus(i);
    std::uniform_int_distribution<std::uint64_t> pick(0, m - 2);
    std::uint64_t v = pick(rng);
    if (v >= word.residues[i]) ++v;
    out.word.residues[i] = v;
    out.mask[i] = true;
    ++out.error_count;
  }
  return out;
}

namespace {

void CheckWord(const Codeword& word, const RrnsConfig& cfg) {
  if (word.residues.size() != cfg.length()) {
    throw Error(ErrorCode::kLengthMismatch, "codeword length");
  }
  for (std::size_t i = 0; i < cfg.length(); ++i) {
    if (word.residues[i] >= cfg.modulus(i)) {
      throw Error(ErrorCode::kOutOfRange, "residue not reduced");
    }
  }
}

template <typename Value>
int DistanceToCandidate(const Codeword& word, const RrnsConfig& cfg,
                        const Value& v) {
  int d = 0;
  for (std::size_t i = 0; i < cfg.length(); ++i) {
    const std::uint64_t r = static_cast<std::uint64_t>(v % cfg.modulus(i));
    d += r != word.residues[i];
  }
  return d;
}

template <typename Value>
DecodeOutcome Vote(const Codeword& word, const RrnsConfig& cfg,
                   std::vector<std::pair<Value, int>>& votes) {
  if (votes.empty()) return DecodeOutcome::Detected();
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second > best->second ||
        (it->second == best->second && it->first < best->first)) {
      best = it;
    }
  }
  const int d = DistanceToCandidate(word, cfg, best->first);
  if (d > cfg.correction_capability()) return DecodeOutcome::Detected();
  return DecodeOutcome::Value(BigInt(best->first), d);
}

template <typename Value>
void AddVote(std::vector<std::pair<Value, int>>& votes, const Value& v) {
  for (auto& [value, count] : votes) {
    if (value == v) {
      ++count;
      return;
    }
  }
  votes.emplace_back(v, 1);
}

}  // namespace

DecodeOutcome MajorityDecode(const Codeword& word, const RrnsConfig& cfg) {
  CheckWord(word, cfg);
  if (cfg.fast_path()) {
    const auto legit = cfg.legitimate_range().convert_to<std::uint64_t>();
    std::vector<std::pair<std::uint64_t, int>> votes;
    std::vector<std::uint64_t> gathered(cfg.n());
    for (const auto& group : cfg.groups()) {
      for (std::size_t j = 0; j < group.positions.size(); ++j) {
        gathered[j] = word.residues[group.positions[j]];
      }
      const std::uint64_t v = group.moduli.ReconstructUnsignedFast(gathered);
      if (v < legit) AddVote(votes, v);
    }
    return Vote(word, cfg, votes);
  }
  std::vector<std::pair<BigInt, int>> votes;
  for (const auto& group : cfg.groups()) {
    std::vector<std::uint64_t> gathered;
    for (std::size_t p : group.positions) gathered.push_back(word.residues[p]);
    BigInt v = CrtReconstructUnsigned(ResidueVector(group.moduli, gathered));
    if (v < cfg.legitimate_range()) AddVote(votes, v);
  }
  return Vote(word, cfg, votes);
}

BigInt VectorDistance(const RrnsConfig& cfg, int eta) {
  const int len = static_cast<int>(cfg.length());
  if (eta < 0 || eta > len) {
    throw Error(ErrorCode::kInvalidArgument, "eta outside [0, n+k]");
  }
  // Elementary symmetric polynomial of (m_i - 1).
  std::vector<BigInt> e(len + 1, 0);
  e[0] = 1;
  for (int i = 0; i < len; ++i) {
    const BigInt w = cfg.modulus(i) - 1;
    for (int j = i + 1; j >= 1; --j) e[j] += e[j - 1] * w;
  }
  return e[eta];
}

BigInt Zeta(const RrnsConfig& cfg, int eta) {
  const int len = static_cast<int>(cfg.length());
  if (eta < 1 || eta > len) {
    throw Error(ErrorCode::kInvalidArgument, "eta outside [1, n+k]");
  }
  const BigInt limit = cfg.legitimate_range() - 1;
  const int pick = len - eta;
  BigInt total = 0;
  // Products only grow, so a partial product above the limit prunes the
  // whole subtree.
  std::function<void(int, int, const BigInt&)> walk =
      [&](int start, int remaining, const BigInt& product) {
        if (product > limit) return;
        if (remaining == 0) {
          total += limit / product;
          return;
        }
        for (int i = start; i <= len - remaining; ++i) {
          walk(i + 1, remaining - 1, product * cfg.modulus(i));
        }
      };
  walk(0, pick, BigInt(1));
  return total;
}

BigInt CodeDistance(const RrnsConfig& cfg, int eta) {
  const int len = static_cast<int>(cfg.length());
  const int k = static_cast<int>(cfg.k());
  if (eta < 0 || eta > len) {
    throw Error(ErrorCode::kInvalidArgument, "eta outside [0, n+k]");
  }
  if (eta == 0) return 1;
  if (eta <= k) return 0;
  BigInt total = 0;
  for (int h = 0; h <= eta - 1 - k; ++h) {
    BigInt term = Binomial(len - eta + h, len - eta) * Zeta(cfg, eta - h);
    if (h % 2) {
      total -= term;
    } else {
      total += term;
    }
  }
  return total;
}

double ProbEtaErrors(const RrnsConfig& cfg, int eta, double p) {
  CheckProbability(p);
  const int len = static_cast<int>(cfg.length());
  if (eta < 0 || eta > len) return 0.0;
  const double choose = Binomial(len, eta).convert_to<double>();
  return choose * std::pow(p, eta) * std::pow(1.0 - p, len - eta);
}

ErrorProbabilities ComputeErrorProbabilities(const RrnsConfig& cfg, double p) {
  CheckProbability(p);
  const int len = static_cast<int>(cfg.length());
  const int k = static_cast<int>(cfg.k());
  ErrorProbabilities out;
  out.p_c = 0.0;
  for (int eta = 0; eta <= cfg.correction_capability(); ++eta) {
    out.p_c += ProbEtaErrors(cfg, eta, p);
  }
  out.p_u = 0.0;
  for (int eta = k + 1; eta <= len; ++eta) {
    const double ratio = CodeDistance(cfg, eta).convert_to<double>() /
                         VectorDistance(cfg, eta).convert_to<double>();
    out.p_u += ratio * ProbEtaErrors(cfg, eta, p);
  }
  out.p_d = std::max(0.0, 1.0 - (out.p_c + out.p_u));
  return out;
}

Attempts Attempts::Finite(std::uint64_t r) {
  if (r < 1) throw Error(ErrorCode::kInvalidArgument, "attempts must be >= 1");
  Attempts a;
  a.count_ = r;
  return a;
}

Attempts Attempts::Parse(std::string_view text) {
  if (text == "inf") return Infinite();
  std::uint64_t v = 0;
  if (text.empty()) throw Error(ErrorCode::kInvalidArgument, "empty attempts");
  for (char c : text) {
    if (c < '0' || c > '9') {
      throw Error(ErrorCode::kInvalidArgument,
                  "attempts must be a positive integer or \"inf\"");
    }
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return Finite(v);
}

std::string Attempts::ToString() const {
  return infinite() ? "inf" : std::to_string(*count_);
}

double OutputErrorProbability(const ErrorProbabilities& probs,
                              Attempts attempts) {
  if (attempts.infinite()) {
    const double denom = probs.p_u + probs.p_c;
    return denom > 0.0 ? probs.p_u / denom : 1.0;
  }
  // 1 - p_c sum_{r<R} p_d^r rewritten with p_c = 1 - p_d - p_u, which keeps
  // its precision when p_err is far below one ULP of 1.
  const auto r = static_cast<double>(attempts.count());
  const double pd = probs.p_d;
  const double pd_r = std::pow(pd, r);
  const double series = pd >= 1.0 ? r : -std::expm1(r * std::log(pd)) / (1.0 - pd);
  return std::clamp(pd_r + probs.p_u * series, 0.0, 1.0);
}

namespace {

std::uint64_t DrawValue(std::mt19937_64& rng, std::uint64_t legit) {
  return std::uniform_int_distribution<std::uint64_t>(0, legit - 1)(rng);
}

void EncodeFast(std::uint64_t value, const RrnsConfig& cfg, Codeword& out) {
  out.residues.resize(cfg.length());
  for (std::size_t i = 0; i < cfg.length(); ++i) {
    out.residues[i] = value % cfg.modulus(i);
  }
}

std::uint64_t RequireFastLegit(const RrnsConfig& cfg) {
  if (!cfg.fast_path()) {
    throw Error(ErrorCode::kInvalidArgument,
                "Monte Carlo requires a code whose moduli product fits 63 bits");
  }
  return cfg.legitimate_range().convert_to<std::uint64_t>();
}

std::size_t ChunkCount(std::uint64_t trials) {
  return static_cast<std::size_t>((trials + kMonteCarloChunk - 1) /
                                  kMonteCarloChunk);
}

std::uint64_t ChunkTrials(std::uint64_t trials, std::size_t chunk) {
  const std::uint64_t begin = chunk * kMonteCarloChunk;
  return std::min<std::uint64_t>(kMonteCarloChunk, trials - begin);
}

}  // namespace

OutcomeCounts MonteCarloOutcomes(const RrnsConfig& cfg, double p,
                                 const MonteCarloOptions& options) {
  CheckProbability(p);
  const std::uint64_t legit = RequireFastLegit(cfg);
  const std::size_t chunks = ChunkCount(options.trials);
  std::vector<OutcomeCounts> partial(chunks);
  ParallelFor(chunks, options.threads, [&](std::size_t c) {
    std::mt19937_64 rng = SubstreamRng(options.seed, c);
    OutcomeCounts local;
    Codeword clean;
    for (std::uint64_t t = 0; t < ChunkTrials(options.trials, c); ++t) {
      const std::uint64_t value = DrawValue(rng, legit);
      EncodeFast(value, cfg, clean);
      const DecodeOutcome out =
          MajorityDecode(InjectResidueErrors(clean, cfg, p, rng).word, cfg);
      ++local.trials;
      if (!out.is_value()) {
        ++local.detected;
      } else if (out.value == value) {
        ++local.correct;
      } else {
        ++local.wrong;
      }
    }
    partial[c] = local;
  });
  OutcomeCounts total;
  for (const auto& c : partial) {
    total.trials += c.trials;
    total.correct += c.correct;
    total.detected += c.detected;
    total.wrong += c.wrong;
  }
  return total;
}

MonteCarloEstimate MonteCarloPErr(const RrnsConfig& cfg, double p,
                                  Attempts attempts,
                                  const MonteCarloOptions& options) {
  CheckProbability(p);
  if (options.trials < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  }
  constexpr std::uint64_t kInfiniteCap = 1000000;
  const std::uint64_t max_attempts =
      attempts.infinite() ? kInfiniteCap : attempts.count();
  const std::uint64_t legit = RequireFastLegit(cfg);
  const std::size_t chunks = ChunkCount(options.trials);
  std::vector<std::uint64_t> failures(chunks, 0);
  ParallelFor(chunks, options.threads, [&](std::size_t c) {
    std::mt19937_64 rng = SubstreamRng(options.seed, c);
    Codeword clean;
    std::uint64_t local = 0;
    for (std::uint64_t t = 0; t < ChunkTrials(options.trials, c); ++t) {
      const std::uint64_t value = DrawValue(rng, legit);
      EncodeFast(value, cfg, clean);
      DecodeOutcome out;
      for (std::uint64_t a = 0; a < max_attempts; ++a) {
        out = MajorityDecode(InjectResidueErrors(clean, cfg, p, rng).word, cfg);
        if (out.is_value()) break;
      }
      if (!out.is_value() || out.value != value) ++local;
    }
    failures[c] = local;
  });
  MonteCarloEstimate est;
  est.trials = options.trials;
  est.failures = std::accumulate(failures.begin(), failures.end(),
                                 std::uint64_t{0});
  est.rate = static_cast<double>(est.failures) / static_cast<double>(est.trials);
  est.std_error =
      std::sqrt(est.rate * (1.0 - est.rate) / static_cast<double>(est.trials));
  est.ci_low = std::max(0.0, est.rate - 3.0 * est.std_error);
  est.ci_high = std::min(1.0, est.rate + 3.0 * est.std_error);
  return est;
}

std::vector<PerrCurvePoint> ComputePerrCurve(std::string_view preset,
                                             std::span<const double> ps,
                                             std::span<const int> ks,
                                             std::span<const Attempts> attempts) {
  std::vector<PerrCurvePoint> out;
  for (int k : ks) {
    const RrnsConfig cfg = RrnsConfig::FromPreset(preset, k);
    for (const Attempts& r : attempts) {
      for (double p : ps) {
        PerrCurvePoint pt;
        pt.p = p;
        pt.k = k;
        pt.attempts = r;
        pt.probs = ComputeErrorProbabilities(cfg, p);
        pt.p_err = OutputErrorProbability(pt.probs, r);
        out.push_back(pt);
      }
    }
  }
  return out;
}

void WritePerrCurveCsv(std::ostream& os,
                       std::span<const PerrCurvePoint> points) {
  os << "p,k,R,p_c,p_d,p_u,p_err\n";
  for (const auto& pt : points) {
    os << FormatDouble(pt.p) << ',' << pt.k << ',' << pt.attempts.ToString()
       << ',' << FormatDouble(pt.probs.p_c) << ',' << FormatDouble(pt.probs.p_d)
       << ',' << FormatDouble(pt.probs.p_u) << ',' << FormatDouble(pt.p_err)
       << '\n';
  }
}

}  // namespace rnsim
