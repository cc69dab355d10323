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

#include "rnsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include "rnsim/analog_core.hpp"
#include "rnsim/csv.hpp"
#include "rnsim/dataset.hpp"
#include "rnsim/energy.hpp"
#include "rnsim/hybrid.hpp"
#include "rnsim/nn.hpp"
#include "rnsim/parallel.hpp"
#include "rnsim/rns.hpp"
#include "rnsim/rrns.hpp"

namespace rnsim {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void Invalid(const std::string& msg) {
  throw Error(ErrorCode::kConfigInvalid, msg);
}

template <class T>
struct IsVector : std::false_type {};
template <class T>
struct IsVector<std::vector<T>> : std::true_type {};

// Accepts 7, 7.0 and 1e6 alike; nlohmann stores literals built in code as
// signed even when non-negative.
std::optional<std::uint64_t> AsCount(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto s = v.get<std::int64_t>();
    if (s >= 0) return static_cast<std::uint64_t>(s);
    return std::nullopt;
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d < 1.8e19 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
  }
  return std::nullopt;
}

template <class T>
T Convert(const json& v, const std::string& where) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) Invalid(where + " must be a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) Invalid(where + " must be a string");
    return v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) Invalid(where + " must be a number");
    return v.get<T>();
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    const auto count = AsCount(v);
    if (!count) Invalid(where + " must be a non-negative integer");
    const std::uint64_t u = *count;
    if (u > std::numeric_limits<T>::max()) Invalid(where + " is too large");
    return static_cast<T>(u);
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) Invalid(where + " must be an integer");
    const auto s = v.get<std::int64_t>();
    if (s < std::numeric_limits<T>::min() || s > std::numeric_limits<T>::max()) {
      Invalid(where + " is out of range");
    }
    return static_cast<T>(s);
  } else if constexpr (IsVector<T>::value) {
    if (!v.is_array()) Invalid(where + " must be an array");
    T out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(Convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
  } else {
    static_assert(std::is_same_v<T, json>);
    return v;
  }
}

// Typed access to one JSON object that remembers which keys were read, so
// leftovers can be reported as unknown.
class Params {
 public:
  Params(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object()) Invalid(scope_ + " must be a JSON object");
  }

  bool Has(const std::string& key) const {
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  T Get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!Has(key)) return fallback;
    return Convert<T>(j_.at(key), Where(key));
  }

  template <class T>
  T Require(const std::string& key) {
    used_.insert(key);
    if (!Has(key)) Invalid(Where(key) + " is required");
    return Convert<T>(j_.at(key), Where(key));
  }

  void Mark(const std::string& key) { used_.insert(key); }

  const json& Raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  // Sub-object; an absent key reads as an empty object.
  Params Child(const std::string& key) {
    used_.insert(key);
    static const json kEmpty = json::object();
    return Params(Has(key) ? j_.at(key) : kEmpty, Where(key));
  }

  std::string Where(const std::string& key) const { return scope_ + "." + key; }

  void Finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) Invalid("unknown key " + Where(item.key()));
    }
  }

 private:
  const json& j_;
  std::string scope_;
  std::set<std::string> used_;
};

// Parse-phase failures of any kind are config errors.
template <class F>
auto Validated(F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigInvalid) throw;
    throw Error(ErrorCode::kConfigInvalid, e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, e.what());
  }
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index) {
  return SubstreamRng(seed, index)();
}

std::vector<Attempts> ParseAttemptsList(Params& p, const std::string& key,
                                        std::vector<Attempts> fallback) {
  p.Mark(key);
  if (!p.Has(key)) return fallback;
  const json& raw = p.Raw(key);
  if (!raw.is_array() || raw.empty()) Invalid(p.Where(key) + " must be a non-empty array");
  std::vector<Attempts> out;
  for (const json& v : raw) {
    if (v.is_string()) {
      out.push_back(Attempts::Parse(v.get<std::string>()));
    } else if (const auto r = AsCount(v); r && *r >= 1) {
      out.push_back(Attempts::Finite(*r));
    } else {
      Invalid(p.Where(key) + " entries must be positive integers or \"inf\"");
    }
  }
  return out;
}

std::vector<double> ParseProbabilities(Params& p, const std::string& key,
                                       std::vector<double> fallback) {
  std::vector<double> ps = p.Get(key, fallback);
  if (ps.empty()) Invalid(p.Where(key) + " must not be empty");
  for (double v : ps) {
    if (!(v >= 0.0 && v <= 1.0)) Invalid(p.Where(key) + " entries must lie in [0, 1]");
  }
  return ps;
}

CoreConfig ParseCore(Params p) {
  const CoreKind kind = ParseCoreKind(p.Require<std::string>("kind"));
  const int b = p.Require<int>("b");
  const std::size_t h = p.Require<std::size_t>("h");
  p.Finish();
  return CoreConfig::Make(kind, b, h);
}

std::optional<CoreConfig> ParseOptionalCore(Params& p, const std::string& key) {
  p.Mark(key);
  if (!p.Has(key)) return std::nullopt;
  return ParseCore(p.Child(key));
}

struct DatasetSpec {
  std::string kind = "blobs";
  std::size_t n = 512;
  double separation = 10.0;
  std::string images;
  std::string labels;
  std::uint64_t seed = 0;
};

DatasetSpec ParseDataset(Params p, std::uint64_t seed) {
  DatasetSpec d;
  d.kind = p.Get<std::string>("kind", d.kind);
  d.seed = seed;
  if (d.kind == "idx") {
    d.images = p.Require<std::string>("images");
    d.labels = p.Require<std::string>("labels");
    d.n = p.Get<std::size_t>("n", 0);  // 0 keeps every sample
  } else {
    ParseSynthKind(d.kind);
    d.n = p.Get<std::size_t>("n", d.n);
    d.separation = p.Get<double>("separation", d.separation);
    if (d.n < 2) Invalid(p.Where("n") + " must be at least 2");
    if (!(d.separation > 0)) Invalid(p.Where("separation") + " must be positive");
  }
  p.Finish();
  return d;
}

Dataset LoadDataset(const DatasetSpec& d) {
  if (d.kind != "idx") return SynthDataset(ParseSynthKind(d.kind), d.n, d.seed, d.separation);
  Dataset all = LoadIdxDataset(d.images, d.labels);
  if (d.n == 0 || d.n >= all.size()) return all;
  return all.Slice(0, d.n);
}

struct ModelChoice {
  std::string type = "mlp";
  std::size_t hidden = 16;
};

ModelChoice ParseModel(Params p) {
  ModelChoice m;
  m.type = p.Get<std::string>("type", m.type);
  if (m.type == "mlp") {
    m.hidden = p.Get<std::size_t>("hidden", m.hidden);
    if (m.hidden == 0) Invalid(p.Where("hidden") + " must be positive");
  } else if (m.type != "cnn") {
    Invalid(p.Where("type") + " must be \"mlp\" or \"cnn\"");
  }
  p.Finish();
  return m;
}

ModelSpec BuildModelSpec(const ModelChoice& m, const Dataset& data) {
  std::vector<std::size_t> sample(data.inputs.dims().begin() + 1, data.inputs.dims().end());
  const auto classes = static_cast<std::size_t>(data.classes);
  if (m.type == "cnn") {
    if (sample.size() != 3) {
      throw Error(ErrorCode::kExperimentFailed, "the cnn model needs image data");
    }
    return ModelSpec::SmallCnn(sample[0], sample[1], sample[2], classes);
  }
  std::size_t in = 1;
  for (std::size_t d : sample) in *= d;
  ModelSpec spec = ModelSpec::Mlp(in, m.hidden, classes);
  spec.input_dims = sample;
  if (sample.size() != 1) spec.layers.insert(spec.layers.begin(), FlattenSpec{});
  return spec;
}

struct TrainParams {
  std::size_t steps = 500;
  std::size_t batch_size = 32;
  SgdConfig sgd;
};

TrainParams ParseTrainParams(Params& p, TrainParams t) {
  t.steps = p.Get("steps", t.steps);
  t.batch_size = p.Get("batch_size", t.batch_size);
  t.sgd.lr = p.Get("lr", t.sgd.lr);
  t.sgd.momentum = p.Get("momentum", t.sgd.momentum);
  if (t.batch_size == 0) Invalid(p.Where("batch_size") + " must be positive");
  if (!(t.sgd.lr >= 0)) Invalid(p.Where("lr") + " must be non-negative");
  return t;
}

// Output directory plus the list of files written so far.
class Outputs {
 public:
  Outputs(fs::path dir, RunReport& report) : dir_(std::move(dir)), report_(report) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir_.string());
  }

  void Write(const std::string& name, std::string_view contents) {
    WriteFileAtomic(dir_ / name, contents);
    report_.artifacts.push_back(dir_ / name);
  }

  void WriteJson(const std::string& name, const json& j) { Write(name, j.dump(2) + "\n"); }

  fs::path Path(const std::string& name) const { return dir_ / name; }
  void Record(const std::string& name) { report_.artifacts.push_back(dir_ / name); }

 private:
  fs::path dir_;
  RunReport& report_;
};

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// ---------------------------------------------------------------- dot-error

struct DotErrorExperiment {
  DotErrorOptions options;

  void Parse(Params& p, const RunSettings& s) {
    options.h = p.Get("h", options.h);
    options.b = p.Get("b", options.b);
    options.trials = p.Get("trials", options.trials);
    std::vector<std::string> names = p.Get<std::vector<std::string>>("cores", {"LP", "RNS"});
    if (names.empty()) Invalid(p.Where("cores") + " must not be empty");
    options.cores.clear();
    for (const auto& n : names) {
      options.cores.push_back(ParseCoreKind(n));
      CoreConfig::Make(options.cores.back(), options.b, options.h);
    }
    if (options.trials == 0) Invalid(p.Where("trials") + " must be positive");
    options.seed = s.seed;
    options.threads = s.threads;
  }

  void Run(Outputs& out, std::ostream& summary) {
    const auto rows = RunDotError(options);
    std::ostringstream csv;
    WriteDotErrorCsv(csv, rows);
    out.Write("dot_error.csv", csv.str());

    json j = {{"b", options.b}, {"h", options.h}, {"trials", options.trials},
              {"cores", json::object()}};
    summary << "core  median|err|            max|err|               bound violations\n";
    std::map<CoreKind, double> medians;
    for (CoreKind kind : options.cores) {
      std::vector<double> errs;
      std::uint64_t violations = 0;
      for (const auto& r : rows) {
        if (r.core != kind) continue;
        errs.push_back(r.abs_error);
        violations += r.abs_error > r.bound;
      }
      const double med = Median(errs);
      const double mx = errs.empty() ? 0.0 : *std::max_element(errs.begin(), errs.end());
      medians[kind] = med;
      j["cores"][std::string(CoreKindName(kind))] = {
          {"median_abs_error", med}, {"max_abs_error", mx}, {"bound_violations", violations}};
      summary << std::left << std::setw(6) << CoreKindName(kind) << std::setw(24)
              << FormatDouble(med) << std::setw(24) << FormatDouble(mx) << violations << "\n";
    }
    if (medians.count(CoreKind::kLp) && medians.count(CoreKind::kRns)) {
      const double rns = medians[CoreKind::kRns];
      j["median_ratio_lp_over_rns"] =
          rns > 0 ? json(medians[CoreKind::kLp] / rns) : json(nullptr);
    }
    out.WriteJson("dot_error_summary.json", j);
  }
};

// ------------------------------------------------------------------- energy

struct EnergyExperiment {
  std::size_t h = 128;
  bool weight_stationary = false;
  ConverterParams params;
  int max_enob = 24;

  void Parse(Params& p, const RunSettings&) {
    h = p.Get("h", h);
    weight_stationary = p.Get("weight_stationary", weight_stationary);
    max_enob = p.Get("max_enob", max_enob);
    Params c = p.Child("converter");
    params.cu = c.Get("cu", params.cu);
    params.vdd = c.Get("vdd", params.vdd);
    params.k1 = c.Get("k1", params.k1);
    params.k2 = c.Get("k2", params.k2);
    c.Finish();
    params.Validate();
    if (h == 0) Invalid(p.Where("h") + " must be positive");
    if (max_enob < 2 || max_enob > 64) Invalid(p.Where("max_enob") + " must lie in [2, 64]");
  }

  void Run(Outputs& out, std::ostream& summary) {
    const auto rows = PresetEnergyTable(h, params, weight_stationary);
    std::ostringstream csv;
    WriteEnergyCsv(csv, rows);
    out.Write("energy.csv", csv.str());

    std::ostringstream scaling;
    scaling << "enob,dacEnergyJ,adcEnergyJ,adcGrowthRatio\n";
    for (int e = 1; e <= max_enob; ++e) {
      scaling << e << "," << FormatDouble(DacEnergy(e, params)) << ","
              << FormatDouble(AdcEnergy(e, params)) << ",";
      if (e > 1) scaling << FormatDouble(AdcEnergy(e, params) / AdcEnergy(e - 1, params));
      scaling << "\n";
    }
    out.Write("adc_scaling.csv", scaling.str());

    json j = {{"h", h}, {"weight_stationary", weight_stationary}};
    if (max_enob >= 22) {
      j["adc22_over_three_adc8"] = AdcEnergy(22, params) / (3 * AdcEnergy(8, params));
    }
    out.WriteJson("energy_summary.json", j);
    WriteEnergyTable(summary, rows);
  }
};

// --------------------------------------------------------------- perr-curve

std::vector<double> DefaultProbabilityGrid() {
  std::vector<double> ps;
  for (double decade : {1e-4, 1e-3, 1e-2, 1e-1}) {
    for (double m : {1.0, 2.0, 5.0}) ps.push_back(decade * m);
  }
  return ps;
}

struct PerrCurveExperiment {
  std::string preset = "rns6";
  std::vector<double> ps;
  std::vector<int> ks;
  std::vector<Attempts> attempts;

  void Parse(Params& p, const RunSettings&) {
    preset = p.Get("preset", preset);
    ModuliSet::Preset(preset);
    ps = ParseProbabilities(p, "p", DefaultProbabilityGrid());
    ks = p.Get<std::vector<int>>("k", {0, 1, 2, 3});
    if (ks.empty()) Invalid(p.Where("k") + " must not be empty");
    for (int k : ks) RrnsConfig::FromPreset(preset, k);
    attempts = ParseAttemptsList(p, "R", {Attempts::Finite(1), Attempts::Finite(2),
                                          Attempts::Infinite()});
  }

  void Run(Outputs& out, std::ostream& summary) {
    const auto points = ComputePerrCurve(preset, ps, ks, attempts);
    std::ostringstream csv;
    WritePerrCurveCsv(csv, points);
    out.Write("perr_curve.csv", csv.str());

    // Trend checks over the grid: p_err must not grow with k or with R.
    std::map<std::tuple<double, int, std::string>, double> at;
    for (const auto& pt : points) at[{pt.p, pt.k, pt.attempts.ToString()}] = pt.p_err;
    std::vector<int> sorted_k = ks;
    std::sort(sorted_k.begin(), sorted_k.end());
    std::uint64_t k_violations = 0, r_violations = 0;
    for (double p : ps) {
      for (const auto& a : attempts) {
        for (std::size_t i = 1; i < sorted_k.size(); ++i) {
          k_violations += at[{p, sorted_k[i], a.ToString()}] >
                          at[{p, sorted_k[i - 1], a.ToString()}] + 1e-15;
        }
      }
      for (int k : ks) {
        for (const auto& a : attempts) {
          for (const auto& b : attempts) {
            const bool fewer = !a.infinite() && (b.infinite() || a.count() < b.count());
            if (fewer) {
              r_violations += at[{p, k, b.ToString()}] > at[{p, k, a.ToString()}] + 1e-15;
            }
          }
        }
      }
    }
    out.WriteJson("perr_curve_summary.json",
                  {{"preset", preset},
                   {"points", points.size()},
                   {"k_monotonicity_violations", k_violations},
                   {"R_monotonicity_violations", r_violations}});
    summary << "perr-curve " << preset << ": " << points.size() << " points, "
            << k_violations << " k-trend violations, " << r_violations
            << " R-trend violations\n";
  }
};

// ------------------------------------------------------------------ rrns-mc

RrnsConfig ParseCode(Params& p) {
  if (p.Has("preset")) {
    const auto preset = p.Require<std::string>("preset");
    const int k = p.Get<int>("k", 2);
    if (p.Has("information") || p.Has("redundant")) {
      Invalid(p.Where("preset") + " excludes explicit moduli");
    }
    return RrnsConfig::FromPreset(preset, k);
  }
  if (p.Has("k")) Invalid(p.Where("k") + " needs a preset");
  p.Mark("k");
  return RrnsConfig(p.Get<std::vector<std::uint64_t>>("information", {3, 5}),
                    p.Get<std::vector<std::uint64_t>>("redundant", {7}));
}

struct RrnsMcExperiment {
  std::optional<RrnsConfig> code;
  std::vector<double> ps;
  std::uint64_t trials = 1000000;
  std::vector<Attempts> attempts;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void Parse(Params& p, const RunSettings& s) {
    code = ParseCode(p);
    ps = ParseProbabilities(p, "p", {0.01, 0.05, 0.1});
    trials = p.Get("trials", trials);
    if (trials == 0) Invalid(p.Where("trials") + " must be positive");
    attempts = ParseAttemptsList(p, "R", {Attempts::Finite(1), Attempts::Finite(2)});
    for (const auto& a : attempts) {
      if (a.infinite()) Invalid(p.Where("R") + " must be finite for Monte Carlo");
    }
    seed = s.seed;
    threads = s.threads;
  }

  void Run(Outputs& out, std::ostream& summary) {
    std::ostringstream csv, perr;
    csv << "p,trials,correct,detected,wrong,pC,pD,pU,zCorrect,zDetected,zWrong\n";
    perr << "p,R,trials,failures,rate,stdError,pErrAnalytic\n";
    json j = {{"code", code->ToString()}, {"trials", trials}, {"rows", json::array()}};
    summary << "code " << code->ToString() << ", " << trials << " trials per point\n"
            << "p         zCorrect  zDetected  zWrong\n";
    std::uint64_t stream = 0;
    for (double p : ps) {
      const ErrorProbabilities e = ComputeErrorProbabilities(*code, p);
      const OutcomeCounts c =
          MonteCarloOutcomes(*code, p, {trials, DeriveSeed(seed, stream++), threads});
      auto z = [&](std::uint64_t observed, double expected) {
        const double n = double(c.trials);
        const double sigma = std::sqrt(expected * (1 - expected) / n);
        const double diff = double(observed) / n - expected;
        return sigma > 0 ? diff / sigma : (diff == 0 ? 0.0 : std::copysign(INFINITY, diff));
      };
      const double zc = z(c.correct, e.p_c), zd = z(c.detected, e.p_d), zu = z(c.wrong, e.p_u);
      csv << FormatDouble(p) << "," << c.trials << "," << c.correct << "," << c.detected << ","
          << c.wrong << "," << FormatDouble(e.p_c) << "," << FormatDouble(e.p_d) << ","
          << FormatDouble(e.p_u) << "," << FormatDouble(zc) << "," << FormatDouble(zd) << ","
          << FormatDouble(zu) << "\n";
      j["rows"].push_back({{"p", p}, {"z_correct", zc}, {"z_detected", zd}, {"z_wrong", zu}});
      summary << std::left << std::setw(10) << FormatDouble(p) << std::setw(10)
              << std::setprecision(3) << zc << std::setw(11) << zd << zu << "\n";
      for (const Attempts& a : attempts) {
        const MonteCarloEstimate m =
            MonteCarloPErr(*code, p, a, {trials, DeriveSeed(seed, stream++), threads});
        perr << FormatDouble(p) << "," << a.ToString() << "," << m.trials << "," << m.failures
             << "," << FormatDouble(m.rate) << "," << FormatDouble(m.std_error) << ","
             << FormatDouble(OutputErrorProbability(e, a)) << "\n";
      }
    }
    out.Write("rrns_mc.csv", csv.str());
    out.Write("rrns_mc_perr.csv", perr.str());
    out.WriteJson("rrns_mc_summary.json", j);
  }
};

// -------------------------------------------------------------------- train

struct TrainExperiment {
  DatasetSpec data;
  std::optional<DatasetSpec> eval_data;
  ModelChoice model;
  TrainOptions options;

  void Parse(Params& p, const RunSettings& s) {
    data = ParseDataset(p.Child("dataset"), s.seed);
    p.Mark("eval_dataset");
    if (p.Has("eval_dataset")) {
      eval_data = ParseDataset(p.Child("eval_dataset"), DeriveSeed(s.seed, 1));
    }
    model = ParseModel(p.Child("model"));
    TrainParams t = ParseTrainParams(p, {});
    options.steps = t.steps;
    options.batch_size = t.batch_size;
    options.sgd = t.sgd;
    options.sgd.fp32_master = p.Get("fp32_master", options.sgd.fp32_master);
    options.sgd.master_bits = p.Get("master_bits", options.sgd.master_bits);
    if (options.sgd.master_bits < 2 || options.sgd.master_bits > 32) {
      Invalid(p.Where("master_bits") + " must lie in [2, 32]");
    }
    options.seed = s.seed;
    options.exec.core = ParseOptionalCore(p, "core");
    options.exec.quantize_forward = p.Get("quantize_forward", true);
    options.exec.quantize_backward = p.Get("quantize_backward", true);
    const double p_err = p.Get("p_err", 0.0);
    if (!(p_err >= 0 && p_err <= 1)) Invalid(p.Where("p_err") + " must lie in [0, 1]");
    if (p_err > 0) options.exec.p_err = p_err;
    options.exec.corruption_seed = DeriveSeed(s.seed, 2);
    options.exec.threads = s.threads;
  }

  void Run(Outputs& out, std::ostream& summary) {
    const Dataset train = LoadDataset(data);
    Model m(BuildModelSpec(model, train), options.seed);
    const TrainReport r = Train(m, train, options);

    std::ostringstream log;
    log << "step,loss\n";
    for (std::size_t i = 0; i < r.losses.size(); ++i) {
      log << i << "," << FormatDouble(r.losses[i]) << "\n";
    }
    out.Write("train_log.csv", log.str());

    const fs::path weights = out.Path("weights.rnst");
    const fs::path tmp = weights.string() + ".tmp";
    SaveWeights(tmp.string(), m);
    fs::rename(tmp, weights);
    out.Record("weights.rnst");

    json j = {{"steps", options.steps},
              {"train_accuracy", r.train_accuracy},
              {"final_loss", r.losses.empty() ? 0.0 : double(r.losses.back())},
              {"core", options.exec.core ? options.exec.core->ToString() : "FP32"}};
    summary << "core " << j["core"].get<std::string>() << ", " << options.steps
            << " steps, final loss " << FormatDouble(j["final_loss"].get<double>()) << ", train accuracy "
            << FormatDouble(r.train_accuracy) << "\n";
    if (eval_data) {
      const double acc = Evaluate(m, LoadDataset(*eval_data), options.exec);
      j["eval_accuracy"] = acc;
      summary << "eval accuracy " << FormatDouble(acc) << "\n";
    }
    out.WriteJson("train_summary.json", j);
  }
};

// -------------------------------------------------------------------- infer

struct InferExperiment {
  DatasetSpec data;
  ModelChoice model;
  std::optional<std::string> weights;
  TrainParams training;
  std::vector<CoreKind> cores;
  std::vector<int> bits;
  std::vector<std::size_t> hs;
  double p_err = 0.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void Parse(Params& p, const RunSettings& s) {
    seed = s.seed;
    threads = s.threads;
    data = ParseDataset(p.Child("dataset"), s.seed);
    model = ParseModel(p.Child("model"));
    p.Mark("weights");
    if (p.Has("weights")) {
      if (p.Has("train")) Invalid(p.Where("train") + " conflicts with weights");
      weights = p.Require<std::string>("weights");
    } else {
      Params t = p.Child("train");
      training = ParseTrainParams(t, {300, 32, {}});
      t.Finish();
    }
    for (const auto& n : p.Get<std::vector<std::string>>("cores", {"LP"})) {
      cores.push_back(ParseCoreKind(n));
    }
    bits = p.Get<std::vector<int>>("b", {2, 4, 6, 8});
    hs = p.Get<std::vector<std::size_t>>("h", {8, 32, 128});
    if (cores.empty() || bits.empty() || hs.empty()) {
      Invalid(p.Where("cores/b/h") + " grids must not be empty");
    }
    for (CoreKind k : cores) {
      for (int b : bits) {
        for (std::size_t h : hs) CoreConfig::Make(k, b, h);
      }
    }
    p_err = p.Get("p_err", p_err);
    if (!(p_err >= 0 && p_err <= 1)) Invalid(p.Where("p_err") + " must lie in [0, 1]");
  }

  void Run(Outputs& out, std::ostream& summary) {
    const Dataset ds = LoadDataset(data);
    Model m(BuildModelSpec(model, ds), seed);
    if (weights) {
      LoadWeights(*weights, m);
    } else {
      TrainOptions t;
      t.steps = training.steps;
      t.batch_size = training.batch_size;
      t.sgd = training.sgd;
      t.seed = seed;
      t.exec.threads = threads;
      Train(m, ds, t);
    }
    ExecConfig fp32;
    fp32.threads = threads;
    const double reference = Evaluate(m, ds, fp32);
    std::ostringstream csv;
    csv << "coreKind,b,h,accuracy\n";
    csv << "FP32,32,0," << FormatDouble(reference) << "\n";
    summary << "FP32 accuracy " << FormatDouble(reference) << "\n"
            << "core  b   h     accuracy\n";
    for (CoreKind kind : cores) {
      for (int b : bits) {
        for (std::size_t h : hs) {
          ExecConfig e;
          e.core = CoreConfig::Make(kind, b, h);
          e.threads = threads;
          if (p_err > 0) e.p_err = p_err;
          e.corruption_seed = DeriveSeed(seed, 3);
          const double acc = Evaluate(m, ds, e);
          csv << CoreKindName(kind) << "," << b << "," << h << "," << FormatDouble(acc) << "\n";
          summary << std::left << std::setw(6) << CoreKindName(kind) << std::setw(4) << b
                  << std::setw(6) << h << FormatDouble(acc) << "\n";
        }
      }
    }
    out.Write("infer.csv", csv.str());
    out.WriteJson("infer_summary.json", {{"fp32_accuracy", reference},
                                         {"samples", ds.size()},
                                         {"p_err", p_err}});
  }
};

// -------------------------------------------------------------- noise-sweep

struct NoiseSweepExperiment {
  DatasetSpec data;
  ModelChoice model;
  TrainParams training;
  std::optional<CoreConfig> core;
  std::vector<double> ps;
  std::vector<int> ks;
  std::vector<Attempts> attempts;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void Parse(Params& p, const RunSettings& s) {
    seed = s.seed;
    threads = s.threads;
    data = ParseDataset(p.Child("dataset"), s.seed);
    model = ParseModel(p.Child("model"));
    training = ParseTrainParams(p, {300, 32, {}});
    core = ParseOptionalCore(p, "core");
    if (!core) core = CoreConfig::Rns("rns6", 16);
    if (core->kind() != CoreKind::kRns) Invalid(p.Where("core") + " must be an RNS core");
    ps = ParseProbabilities(p, "p", {0.0, 1e-4, 1e-3, 1e-2, 0.05, 0.1});
    ks = p.Get<std::vector<int>>("k", {0, 1, 2});
    if (ks.empty()) Invalid(p.Where("k") + " must not be empty");
    for (int k : ks) RrnsConfig::FromPreset(Preset(), k);
    attempts = ParseAttemptsList(p, "R", {Attempts::Finite(1), Attempts::Finite(2),
                                          Attempts::Infinite()});
  }

  std::string Preset() const { return "rns" + std::to_string(core->b_dac()); }

  void Run(Outputs& out, std::ostream& summary) {
    const Dataset ds = LoadDataset(data);
    Model m(BuildModelSpec(model, ds), seed);
    TrainOptions t;
    t.steps = training.steps;
    t.batch_size = training.batch_size;
    t.sgd = training.sgd;
    t.seed = seed;
    t.exec.threads = threads;
    Train(m, ds, t);

    ExecConfig clean;
    clean.core = core;
    clean.threads = threads;
    const double clean_acc = Evaluate(m, ds, clean);
    std::ostringstream csv;
    csv << "p,k,R,pC,pD,pU,pOut,accuracy\n";
    summary << core->ToString() << ", noiseless accuracy " << FormatDouble(clean_acc) << "\n"
            << "p         k  R    pOut                     accuracy\n";
    for (double p : ps) {
      for (int k : ks) {
        const ErrorProbabilities e =
            ComputeErrorProbabilities(RrnsConfig::FromPreset(Preset(), k), p);
        for (const Attempts& a : attempts) {
          const double p_out = OutputErrorProbability(e, a);
          ExecConfig noisy = clean;
          noisy.p_err = p_out;
          noisy.corruption_seed = DeriveSeed(seed, 4);
          const double acc = Evaluate(m, ds, noisy);
          csv << FormatDouble(p) << "," << k << "," << a.ToString() << ","
              << FormatDouble(e.p_c) << "," << FormatDouble(e.p_d) << ","
              << FormatDouble(e.p_u) << "," << FormatDouble(p_out) << ","
              << FormatDouble(acc) << "\n";
          summary << std::left << std::setw(10) << FormatDouble(p) << std::setw(3) << k
                  << std::setw(5) << a.ToString() << std::setw(25) << FormatDouble(p_out)
                  << FormatDouble(acc) << "\n";
        }
      }
    }
    out.Write("noise_sweep.csv", csv.str());
    out.WriteJson("noise_sweep_summary.json",
                  {{"core", core->ToString()}, {"noiseless_accuracy", clean_acc}});
  }
};

// ------------------------------------------------------------- hybrid-check

BigInt RandomBelow(const BigInt& limit, std::mt19937_64& rng) {
  BigInt v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 64) + rng();
  return v % limit;
}

BigInt Power(const BigInt& base, std::size_t e) {
  BigInt r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= base;
  return r;
}

struct HybridTally {
  std::uint64_t cases = 0;
  std::uint64_t mismatches = 0;
  std::uint64_t rejected = 0;
};

struct HybridResults {
  HybridTally add, mul, dot, detector;
};

struct HybridLimits {
  std::uint64_t cases = 10000;
  std::size_t max_digits = 2;
  std::size_t dot_max_h = 2;
  std::size_t dot_max_digits = 1;
};

HybridResults RunHybridOracle(const HybridConfig& cfg, const HybridLimits& lim,
                              std::mt19937_64& rng, bool exhaustive_detector) {
  HybridResults r;
  const BigInt& mp = cfg.primary_range();
  auto check = [](HybridTally& t, const std::function<bool()>& f) {
    ++t.cases;
    try {
      t.mismatches += !f();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDigitRangeViolation || e.code() == ErrorCode::kOverflow) {
        ++t.rejected;
      } else {
        ++t.mismatches;
      }
    }
  };
  for (std::uint64_t c = 0; c < lim.cases; ++c) {
    const std::size_t da = 1 + rng() % lim.max_digits, db = 1 + rng() % lim.max_digits;
    const BigInt a = RandomBelow(Power(mp, da), rng), b = RandomBelow(Power(mp, db), rng);
    const HybridNumber ha = ToHybrid(a, da, cfg), hb = ToHybrid(b, db, cfg);
    check(r.add, [&] { return FromHybrid(HybridAdd(ha, hb, cfg), cfg) == a + b; });
    check(r.mul, [&] { return FromHybrid(HybridMul(ha, hb, cfg), cfg) == a * b; });
    const std::size_t h = 1 + rng() % lim.dot_max_h;
    const std::size_t digits = 1 + rng() % lim.dot_max_digits;
    std::vector<HybridNumber> ws, xs;
    BigInt expect = 0;
    for (std::size_t i = 0; i < h; ++i) {
      const BigInt w = RandomBelow(Power(mp, digits), rng);
      const BigInt x = RandomBelow(Power(mp, digits), rng);
      ws.push_back(ToHybrid(w, digits, cfg));
      xs.push_back(ToHybrid(x, digits, cfg));
      expect += w * x;
    }
    check(r.dot, [&] { return FromHybrid(HybridDot(ws, xs, cfg), cfg) == expect; });
  }
  if (exhaustive_detector) {
    const auto cap = cfg.digit_capacity().convert_to<std::uint64_t>();
    for (std::uint64_t v = 0; v < cap; ++v) {
      check(r.detector, [&] {
        const CarrySplit s = SplitDigit(RawDigit(v, cfg), cfg);
        const BigInt q = v / mp, rem = v % mp;
        return CrtReconstructUnsigned(s.remainder.primary) == rem &&
               CrtReconstructUnsigned(s.remainder.secondary) == rem &&
               CrtReconstructUnsigned(s.quotient_secondary) == q &&
               s.carry == (q != 0);
      });
    }
  }
  return r;
}

ModuliSet ParseModuli(Params& p, const std::string& key, std::vector<std::uint64_t> fallback) {
  if (p.Has(key) && p.Raw(key).is_string()) {
    return ModuliSet::Preset(p.Require<std::string>(key));
  }
  return ModuliSet(p.Get(key, fallback));
}

struct HybridCheckExperiment {
  std::optional<HybridConfig> cfg;
  HybridLimits limits;
  std::uint64_t exhaustive_limit = 1000000;
  std::uint64_t seed = 1;

  void Parse(Params& p, const RunSettings& s) {
    seed = s.seed;
    cfg.emplace(ParseModuli(p, "primary", {3, 5}), ParseModuli(p, "secondary", {7, 11}));
    limits.cases = p.Get("cases", limits.cases);
    limits.max_digits = p.Get("max_digits", limits.max_digits);
    limits.dot_max_h = p.Get("dot_max_h", limits.dot_max_h);
    limits.dot_max_digits = p.Get("dot_max_digits", limits.dot_max_digits);
    exhaustive_limit = p.Get("exhaustive_limit", exhaustive_limit);
    if (limits.max_digits == 0 || limits.dot_max_h == 0 || limits.dot_max_digits == 0) {
      Invalid(p.Where("max_digits/dot_max_h/dot_max_digits") + " must be positive");
    }
  }

  void Run(Outputs& out, std::ostream& summary) {
    std::mt19937_64 rng = SubstreamRng(seed, 0);
    const bool exhaustive = cfg->digit_capacity() <= exhaustive_limit;
    const HybridResults r = RunHybridOracle(*cfg, limits, rng, exhaustive);
    std::ostringstream csv;
    csv << "op,cases,mismatches,rejected\n";
    std::uint64_t mismatches = 0;
    summary << "primary " << cfg->primary().ToString() << ", secondary "
            << cfg->secondary().ToString() << "\nop        cases     mismatches  rejected\n";
    auto row = [&](const char* op, const HybridTally& t) {
      csv << op << "," << t.cases << "," << t.mismatches << "," << t.rejected << "\n";
      summary << std::left << std::setw(10) << op << std::setw(10) << t.cases << std::setw(12)
              << t.mismatches << t.rejected << "\n";
      mismatches += t.mismatches;
    };
    row("add", r.add);
    row("mul", r.mul);
    row("dot", r.dot);
    if (exhaustive) row("detector", r.detector);
    out.Write("hybrid_check.csv", csv.str());
    if (mismatches) {
      throw Error(ErrorCode::kExperimentFailed,
                  std::to_string(mismatches) + " hybrid results disagree with big integers");
    }
  }
};

// ------------------------------------------------------------------- verify

struct SuiteResult {
  std::string name;
  std::uint64_t cases = 0;
  std::uint64_t failures = 0;
};

SuiteResult CrtSuite(std::uint64_t cases, std::uint64_t seed, unsigned threads) {
  SuiteResult r{"crt-round-trip"};
  const ModuliSet small({3, 5, 7, 11, 13});
  const std::int64_t psi = small.half_range_i64();
  for (std::int64_t v = -psi; v <= psi; ++v) {
    ++r.cases;
    r.failures += CrtReconstruct(ForwardConvert(v, small)) != v;
  }
  const auto names = ModuliSet::PresetNames();
  std::vector<std::uint64_t> fails(names.size(), 0);
  ParallelFor(names.size(), threads, [&](std::size_t i) {
    const ModuliSet set = ModuliSet::Preset(names[i]);
    const std::int64_t half = set.half_range_i64();
    std::mt19937_64 rng = SubstreamRng(seed, i);
    std::uniform_int_distribution<std::int64_t> d(-half, half);
    for (std::uint64_t c = 0; c < cases; ++c) {
      const std::int64_t v = d(rng);
      fails[i] += CrtReconstruct(ForwardConvert(v, set)) != v;
    }
  });
  for (auto f : fails) r.failures += f;
  r.cases += cases * names.size();
  return r;
}

SuiteResult RnsHpSuite(std::uint64_t tiles, std::size_t h, std::uint64_t seed,
                       unsigned threads, bool inject_fault) {
  SuiteResult r{"rns-equals-hp"};
  const auto names = ModuliSet::PresetNames();
  std::vector<std::uint64_t> fails(names.size() * tiles, 0);
  ParallelFor(fails.size(), threads, [&](std::size_t idx) {
    const std::size_t preset = idx / tiles;
    const CoreConfig rns = CoreConfig::Rns(names[preset], h);
    const CoreConfig hp = CoreConfig::Hp(rns.b_dac(), h);
    const int b = rns.b_dac();
    std::mt19937_64 rng = SubstreamRng(seed, idx);
    std::uniform_int_distribution<std::int64_t> code(-MaxCode(b), MaxCode(b));
    QuantizedMatrix w{h, h, std::vector<std::int64_t>(h * h), std::vector<float>(h, 1.0f), b};
    QuantizedVector x{std::vector<std::int64_t>(h), 1.0f, b};
    for (auto& v : w.values) v = code(rng);
    for (auto& v : x.values) v = code(rng);
    const TileOutput ref = MvmHp(w, x, hp);
    auto residues = RnsResidueMvm(w, x, *rns.moduli());
    if (inject_fault && idx == 0) {
      residues[0][0] = (residues[0][0] + 1) % rns.moduli()->modulus(0);
    }
    const bool path_ok = RnsReconstructRows(residues, *rns.moduli()) == ref.raw;
    const bool core_ok = MvmRns(w, x, rns).raw == ref.raw;
    fails[idx] = !(path_ok && core_ok);
  });
  for (auto f : fails) r.failures += f;
  r.cases = fails.size();
  return r;
}

SuiteResult DistanceSuite() {
  SuiteResult r{"distance-brute-force"};
  const std::vector<std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>>> codes = {
      {{3, 5}, {7}}, {{3, 5}, {7, 11}}, {{5, 7}, {9, 11}}, {{3, 4, 5}, {7, 11}}};
  for (const auto& [info, red] : codes) {
    const RrnsConfig cfg(info, red);
    const auto ms = cfg.all_moduli().moduli();
    const std::size_t len = ms.size();
    std::vector<std::uint64_t> d(len + 1, 0), v(len + 1, 0);
    const auto legit = cfg.legitimate_range().convert_to<std::uint64_t>();
    for (std::uint64_t x = 0; x < legit; ++x) {
      int dist = 0;
      for (auto m : ms) dist += x % m != 0;
      ++d[dist];
    }
    std::vector<std::uint64_t> digit(len, 0);
    for (;;) {
      int dist = 0;
      for (auto x : digit) dist += x != 0;
      ++v[dist];
      std::size_t i = 0;
      while (i < len && ++digit[i] == ms[i]) digit[i++] = 0;
      if (i == len) break;
    }
    for (std::size_t eta = 0; eta <= len; ++eta) {
      r.cases += 2;
      r.failures += CodeDistance(cfg, int(eta)) != d[eta];
      r.failures += VectorDistance(cfg, int(eta)) != v[eta];
    }
  }
  return r;
}

struct McRow {
  std::string code;
  double p = 0;
  OutcomeCounts counts;
  double p_c = 0;
  double z = 0;
};

// Compares the decoded-correctly rate with p_c, which is exact for
// independent residue errors; the split of the remainder into detected and
// wrong is not, so only its total is checked.
SuiteResult MonteCarloSuite(std::uint64_t trials, std::uint64_t seed, unsigned threads,
                            std::vector<McRow>& rows) {
  SuiteResult r{"monte-carlo-vs-analytic"};
  const RrnsConfig codes[] = {RrnsConfig({3, 5}, {7}), RrnsConfig({3, 5}, {7, 11})};
  std::uint64_t stream = 0;
  for (const RrnsConfig& cfg : codes) {
    for (double p : {0.01, 0.1}) {
      McRow row{cfg.ToString(), p, {}, 0.0, 0.0};
      row.counts = MonteCarloOutcomes(cfg, p, {trials, DeriveSeed(seed, stream++), threads});
      row.p_c = ComputeErrorProbabilities(cfg, p).p_c;
      const double n = double(row.counts.trials);
      const double sigma = std::sqrt(row.p_c * (1 - row.p_c) / n);
      row.z = (double(row.counts.correct) / n - row.p_c) / sigma;
      ++r.cases;
      r.failures += !(std::abs(row.z) <= 5.0);
      rows.push_back(row);
    }
  }
  return r;
}

SuiteResult HybridSuite(std::uint64_t cases, std::uint64_t seed) {
  SuiteResult r{"hybrid-vs-big-integer"};
  const HybridConfig small(ModuliSet({3, 5}), ModuliSet({7, 11}));
  const HybridConfig large(ModuliSet::Preset("rns4"), ModuliSet({17, 19, 23, 29, 31}));
  std::mt19937_64 rng = SubstreamRng(seed, 0);
  const HybridResults a = RunHybridOracle(small, {cases, 2, 2, 1}, rng, true);
  const HybridResults b = RunHybridOracle(large, {cases, 2, 16, 2}, rng, false);
  for (const HybridResults* h : {&a, &b}) {
    for (const HybridTally* t : {&h->add, &h->mul, &h->dot, &h->detector}) {
      r.cases += t->cases;
      r.failures += t->mismatches + t->rejected;
    }
  }
  return r;
}

struct VerifyExperiment {
  std::uint64_t crt_cases = 100000;
  std::uint64_t tiles = 100;
  std::size_t tile_h = 128;
  std::uint64_t mc_trials = 200000;
  std::uint64_t hybrid_cases = 2000;
  bool inject_fault = false;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void Parse(Params& p, const RunSettings& s) {
    crt_cases = p.Get("crt_cases", crt_cases);
    tiles = p.Get("tiles", tiles);
    tile_h = p.Get("tile_h", tile_h);
    mc_trials = p.Get("mc_trials", mc_trials);
    hybrid_cases = p.Get("hybrid_cases", hybrid_cases);
    inject_fault = p.Get("inject_fault", inject_fault);
    if (tiles == 0 || mc_trials == 0) Invalid(p.Where("tiles/mc_trials") + " must be positive");
    for (const auto& name : ModuliSet::PresetNames()) CoreConfig::Rns(name, tile_h);
    seed = s.seed;
    threads = s.threads;
  }

  void Run(Outputs& out, std::ostream& summary) {
    std::vector<McRow> mc;
    const std::vector<SuiteResult> suites = {
        CrtSuite(crt_cases, DeriveSeed(seed, 10), threads),
        RnsHpSuite(tiles, tile_h, DeriveSeed(seed, 11), threads, inject_fault),
        DistanceSuite(),
        MonteCarloSuite(mc_trials, DeriveSeed(seed, 12), threads, mc),
        HybridSuite(hybrid_cases, DeriveSeed(seed, 13)),
    };
    std::ostringstream csv;
    csv << "suite,cases,failures,verdict\n";
    std::vector<std::string> failing;
    summary << "suite                     cases       failures  verdict\n";
    for (const auto& s : suites) {
      const char* verdict = s.failures ? "FAIL" : "PASS";
      if (s.failures) failing.push_back(s.name);
      csv << s.name << "," << s.cases << "," << s.failures << "," << verdict << "\n";
      summary << std::left << std::setw(26) << s.name << std::setw(12) << s.cases
              << std::setw(10) << s.failures << verdict << "\n";
    }
    out.Write("verify.csv", csv.str());

    std::ostringstream mcsv;
    mcsv << "code,p,trials,correct,detected,wrong,pC,zCorrect\n";
    for (const auto& row : mc) {
      mcsv << '"' << row.code << '"' << "," << FormatDouble(row.p) << "," << row.counts.trials
           << "," << row.counts.correct << "," << row.counts.detected << ","
           << row.counts.wrong << "," << FormatDouble(row.p_c) << "," << FormatDouble(row.z)
           << "\n";
    }
    out.Write("verify_mc.csv", mcsv.str());
    out.WriteJson("verify_summary.json",
                  {{"all_passed", failing.empty()}, {"failing", failing}, {"seed", seed}});
    if (!failing.empty()) {
      std::string list;
      for (const auto& f : failing) list += (list.empty() ? "" : ", ") + f;
      throw Error(ErrorCode::kVerificationFailed, "failing suites: " + list);
    }
  }
};

template <class E>
RunReport Execute(const RunSettings& s, std::ostream& summary) {
  E experiment;
  Validated([&] {
    Params p(s.params, "config");
    experiment.Parse(p, s);
    p.Finish();
    return 0;
  });
  RunReport report;
  Outputs out(s.out_dir, report);
  experiment.Run(out, summary);
  return report;
}

std::optional<std::string> Env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace

const std::vector<std::string>& ExperimentNames() {
  static const std::vector<std::string> names = {
      "dot-error", "energy", "perr-curve",   "rrns-mc", "noise-sweep",
      "train",     "infer",  "hybrid-check", "verify"};
  return names;
}

nlohmann::json LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Invalid("cannot read config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    Invalid(path.string() + ": " + e.what());
  }
}

RunSettings ResolveSettings(std::string_view subcommand, const nlohmann::json& config,
                            const RunOverrides& overrides) {
  if (!config.is_object()) Invalid("config must be a JSON object");
  RunSettings s;
  s.params = config;
  std::string named;
  if (config.contains("experiment")) {
    named = Convert<std::string>(config.at("experiment"), "config.experiment");
    s.params.erase("experiment");
  }
  if (subcommand == "run") {
    if (named.empty()) Invalid("config.experiment is required");
    s.experiment = named;
  } else {
    s.experiment = std::string(subcommand);
    if (!named.empty() && named != subcommand) {
      Invalid("config names experiment \"" + named + "\" but the subcommand is \"" +
              s.experiment + "\"");
    }
  }
  const auto& names = ExperimentNames();
  if (std::find(names.begin(), names.end(), s.experiment) == names.end()) {
    Invalid("unknown experiment \"" + s.experiment + "\"");
  }
  auto take = [&](const char* key, auto fallback) {
    using T = decltype(fallback);
    if (!config.contains(key)) return fallback;
    T v = Convert<T>(config.at(key), std::string("config.") + key);
    s.params.erase(key);
    return v;
  };
  s.seed = take("seed", std::uint64_t{1});
  s.threads = take("threads", 1u);
  s.out_dir = take("out_dir", std::string("out"));

  if (const auto env = Env("RNSIM_THREADS")) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(*env, &used);
      if (used != env->size()) throw std::invalid_argument("trailing characters");
      s.threads = static_cast<unsigned>(v);
    } catch (const std::exception&) {
      Invalid("RNSIM_THREADS must be a positive integer, got \"" + *env + "\"");
    }
  }
  if (const auto env = Env("RNSIM_OUT_DIR")) s.out_dir = *env;
  if (overrides.seed) s.seed = *overrides.seed;
  if (overrides.threads) s.threads = *overrides.threads;
  if (overrides.out_dir) s.out_dir = *overrides.out_dir;
  if (s.threads == 0) Invalid("thread count must be positive");
  return s;
}

RunReport RunExperiment(const RunSettings& settings, std::ostream& summary) {
  const std::string& e = settings.experiment;
  if (e == "dot-error") return Execute<DotErrorExperiment>(settings, summary);
  if (e == "energy") return Execute<EnergyExperiment>(settings, summary);
  if (e == "perr-curve") return Execute<PerrCurveExperiment>(settings, summary);
  if (e == "rrns-mc") return Execute<RrnsMcExperiment>(settings, summary);
  if (e == "noise-sweep") return Execute<NoiseSweepExperiment>(settings, summary);
  if (e == "train") return Execute<TrainExperiment>(settings, summary);
  if (e == "infer") return Execute<InferExperiment>(settings, summary);
  if (e == "hybrid-check") return Execute<HybridCheckExperiment>(settings, summary);
  if (e == "verify") return Execute<VerifyExperiment>(settings, summary);
  Invalid("unknown experiment \"" + e + "\"");
}

int ExitCodeFor(const Error& error) {
  return error.code() == ErrorCode::kConfigInvalid ? 2 : 1;
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIoError, "cannot move " + tmp.string() + " to " + path.string());
  }
}

}  // namespace rnsim
