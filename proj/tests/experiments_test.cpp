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

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rnsim/nn.hpp"

namespace rnsim {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rnsim_experiments_test" / name;
  fs::remove_all(dir);
  return dir;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> Lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(Slurp(p));
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

// Runs an experiment into a fresh directory and returns that directory.
fs::path RunInto(const std::string& name, json config, const std::string& dir,
             std::optional<unsigned> threads = std::nullopt) {
  const fs::path out = Scratch(dir);
  RunOverrides o;
  o.out_dir = out;
  o.threads = threads;
  std::ostringstream summary;
  RunExperiment(ResolveSettings(name, config, o), summary);
  return out;
}

class EnvGuard {
 public:
  EnvGuard(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value, 1);
  }
  ~EnvGuard() {
    if (old_) {
      ::setenv(name_, old_->c_str(), 1);
    } else {
      ::unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

json SmallVerify() {
  return {{"crt_cases", 2000}, {"tiles", 4}, {"mc_trials", 50000}, {"hybrid_cases", 200}};
}

TEST(SettingsTest, DefaultsAndPrecedence) {
  const json cfg = {{"seed", 7}, {"threads", 2}, {"out_dir", "cfg-out"}, {"h", 16}};
  RunSettings s = ResolveSettings("dot-error", cfg, {});
  EXPECT_EQ(s.experiment, "dot-error");
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.threads, 2u);
  EXPECT_EQ(s.out_dir, "cfg-out");
  EXPECT_EQ(s.params, json({{"h", 16}}));
  {
    EnvGuard threads("RNSIM_THREADS", "3");
    EnvGuard out("RNSIM_OUT_DIR", "env-out");
    s = ResolveSettings("dot-error", cfg, {});
    EXPECT_EQ(s.threads, 3u);
    EXPECT_EQ(s.out_dir, "env-out");
    s = ResolveSettings("dot-error", cfg, {std::uint64_t{9}, fs::path("flag-out"), 5u});
    EXPECT_EQ(s.seed, 9u);
    EXPECT_EQ(s.threads, 5u);
    EXPECT_EQ(s.out_dir, "flag-out");
  }
  {
    EnvGuard threads("RNSIM_THREADS", "many");
    EXPECT_EQ(CodeOf([&] { ResolveSettings("energy", json::object(), {}); }),
              ErrorCode::kConfigInvalid);
  }
  EXPECT_EQ(ResolveSettings("run", {{"experiment", "energy"}}, {}).experiment, "energy");
}

TEST(SettingsTest, Rejections) {
  auto code = [](std::string_view sub, const json& cfg) {
    return CodeOf([&] { ResolveSettings(sub, cfg, {}); });
  };
  EXPECT_EQ(code("run", {{"experiment", "sorting"}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("run", json::object()), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("sorting", json::object()), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("energy", {{"experiment", "verify"}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("energy", {{"seed", -1}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("energy", {{"threads", 0}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("energy", json::array()), ErrorCode::kConfigInvalid);
}

TEST(SettingsTest, LoadConfig) {
  const fs::path dir = Scratch("load");
  fs::create_directories(dir);
  std::ofstream(dir / "ok.json") << R"({"experiment": "energy", "h": 64})";
  std::ofstream(dir / "bad.json") << R"({"experiment": )";
  EXPECT_EQ(LoadConfig(dir / "ok.json")["h"], 64);
  EXPECT_EQ(CodeOf([&] { LoadConfig(dir / "bad.json"); }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(CodeOf([&] { LoadConfig(dir / "absent.json"); }), ErrorCode::kConfigInvalid);
}

TEST(ValidationTest, BadParametersAreConfigErrors) {
  auto code = [](const std::string& name, const json& cfg) {
    return CodeOf([&] { RunInto(name, cfg, "invalid"); });
  };
  EXPECT_EQ(code("energy", {{"hh", 64}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("energy", {{"h", "wide"}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("energy", {{"converter", {{"k2", -1.0}}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("dot-error", {{"cores", {"RNS"}}, {"b", 3}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("dot-error", {{"cores", {"XP"}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("perr-curve", {{"p", {0.1, 1.5}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("perr-curve", {{"R", {0}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("perr-curve", {{"preset", "rns9"}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("rrns-mc", {{"R", {"inf"}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("rrns-mc", {{"information", {4, 6}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("train", {{"core", {{"kind", "LP"}, {"b", 6}}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("train", {{"dataset", {{"kind", "moons"}}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("train", {{"model", {{"type", "rnn"}}}}), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("noise-sweep", {{"core", {{"kind", "LP"}, {"b", 6}, {"h", 16}}}}),
            ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("hybrid-check", {{"primary", {3, 5}}, {"secondary", {5, 7}}}),
            ErrorCode::kConfigInvalid);
  // Nothing is written when validation fails.
  EXPECT_FALSE(fs::exists(Scratch("invalid")));
  EXPECT_EQ(ExitCodeFor(Error(ErrorCode::kConfigInvalid, "")), 2);
  EXPECT_EQ(ExitCodeFor(Error(ErrorCode::kVerificationFailed, "")), 1);
  EXPECT_EQ(ExitCodeFor(Error(ErrorCode::kIoError, "")), 1);
}

TEST(ExperimentTest, DotError) {
  const fs::path out = RunInto("dot-error", {{"trials", 500}}, "dot");
  const auto lines = Lines(out / "dot_error.csv");
  EXPECT_EQ(lines[0], "trial,coreKind,b,h,absError");
  EXPECT_EQ(lines.size(), 1001u);
  const json s = json::parse(Slurp(out / "dot_error_summary.json"));
  EXPECT_GT(s["median_ratio_lp_over_rns"].get<double>(), 10.0);
  EXPECT_EQ(s["cores"]["RNS"]["bound_violations"], 0);
}

TEST(ExperimentTest, Energy) {
  const fs::path out = RunInto("energy", json::object(), "energy");
  const auto lines = Lines(out / "energy.csv");
  EXPECT_EQ(lines[0], "kind,b_dac,b_adc,nModuli,dacEnergyJ,adcEnergyJ,totalJ");
  EXPECT_EQ(lines.size(), 16u);
  const auto scaling = Lines(out / "adc_scaling.csv");
  EXPECT_EQ(scaling[0], "enob,dacEnergyJ,adcEnergyJ,adcGrowthRatio");
  EXPECT_EQ(scaling.size(), 25u);
  const json s = json::parse(Slurp(out / "energy_summary.json"));
  EXPECT_GE(s["adc22_over_three_adc8"].get<double>(), 1e6);
}

TEST(ExperimentTest, PerrCurve) {
  const fs::path out = RunInto("perr-curve", json::object(), "perr");
  const auto lines = Lines(out / "perr_curve.csv");
  EXPECT_EQ(lines[0], "p,k,R,p_c,p_d,p_u,p_err");
  EXPECT_EQ(lines.size(), 1u + 12 * 4 * 3);
  const json s = json::parse(Slurp(out / "perr_curve_summary.json"));
  EXPECT_EQ(s["R_monotonicity_violations"], 0);
}

TEST(ExperimentTest, RrnsMonteCarlo) {
  const fs::path out =
      RunInto("rrns-mc", {{"trials", 20000}, {"p", {0.05}}, {"R", {1, 3}}}, "rrns-mc");
  const auto lines = Lines(out / "rrns_mc.csv");
  EXPECT_EQ(lines[0], "p,trials,correct,detected,wrong,pC,pD,pU,zCorrect,zDetected,zWrong");
  EXPECT_EQ(lines.size(), 2u);
  const auto perr = Lines(out / "rrns_mc_perr.csv");
  EXPECT_EQ(perr[0], "p,R,trials,failures,rate,stdError,pErrAnalytic");
  EXPECT_EQ(perr.size(), 3u);
  const json s = json::parse(Slurp(out / "rrns_mc_summary.json"));
  EXPECT_LT(std::abs(s["rows"][0]["z_correct"].get<double>()), 4.0);
  EXPECT_EQ(s["code"], "RRNS(3,2) {3,5 | 7}");
}

TEST(ExperimentTest, HybridCheck) {
  const fs::path out = RunInto("hybrid-check", {{"cases", 500}}, "hybrid");
  const auto lines = Lines(out / "hybrid_check.csv");
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "op,cases,mismatches,rejected");
  EXPECT_EQ(lines[4], "detector,1155,0,0");
  RunInto("hybrid-check",
      {{"cases", 200}, {"primary", "rns4"}, {"secondary", {17, 19, 23, 29, 31}},
       {"dot_max_h", 16}},
      "hybrid-large");
}

TEST(ExperimentTest, TrainThenInfer) {
  const json data = {{"kind", "blobs"}, {"n", 128}};
  const fs::path trained = RunInto(
      "train",
      {{"dataset", data}, {"steps", 60}, {"core", {{"kind", "RNS"}, {"b", 7}, {"h", 16}}}},
      "train");
  EXPECT_EQ(Lines(trained / "train_log.csv").size(), 61u);
  const json s = json::parse(Slurp(trained / "train_summary.json"));
  EXPECT_GE(s["train_accuracy"].get<double>(), 0.95);

  const fs::path out = RunInto("infer",
                           {{"dataset", data},
                            {"weights", (trained / "weights.rnst").string()},
                            {"cores", {"LP", "HP"}},
                            {"b", {4, 8}},
                            {"h", {16}}},
                           "infer");
  const auto lines = Lines(out / "infer.csv");
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "coreKind,b,h,accuracy");
  EXPECT_EQ(lines[1].rfind("FP32,32,0,", 0), 0u);

  // A mismatched weights file is an experiment failure, not a config error.
  EXPECT_EQ(CodeOf([&] {
              RunInto("infer",
                  {{"dataset", data},
                   {"model", {{"hidden", 5}}},
                   {"weights", (trained / "weights.rnst").string()}},
                  "infer-bad");
            }),
            ErrorCode::kShapeMismatch);
}

TEST(ExperimentTest, NoiseSweep) {
  const fs::path out = RunInto("noise-sweep",
                           {{"dataset", {{"kind", "blobs"}, {"n", 128}}},
                            {"steps", 50},
                            {"p", {0.0, 0.5}},
                            {"k", {0, 2}},
                            {"R", {1}}},
                           "noise");
  const auto lines = Lines(out / "noise_sweep.csv");
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "p,k,R,pC,pD,pU,pOut,accuracy");
  const json s = json::parse(Slurp(out / "noise_sweep_summary.json"));
  // p = 0 rows keep the noiseless accuracy.
  for (int row : {1, 2}) {
    const std::string& line = lines[row];
    const double acc = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_EQ(acc, s["noiseless_accuracy"].get<double>()) << line;
  }
}

TEST(VerifyTest, PassesAndIsDeterministic) {
  const fs::path a = RunInto("verify", SmallVerify(), "verify-a", 1u);
  const fs::path b = RunInto("verify", SmallVerify(), "verify-b", 3u);
  for (const char* f : {"verify.csv", "verify_mc.csv", "verify_summary.json"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
  for (const auto& line : Lines(a / "verify.csv")) {
    if (line.rfind("suite,", 0) == 0) continue;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "PASS") << line;
  }
  json other = SmallVerify();
  other["seed"] = 99;
  const fs::path c = RunInto("verify", other, "verify-c");
  EXPECT_NE(Slurp(a / "verify_mc.csv"), Slurp(c / "verify_mc.csv"));
  EXPECT_EQ(json::parse(Slurp(c / "verify_summary.json"))["all_passed"], true);
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_NE(entry.path().extension(), ".tmp");
  }
}

TEST(VerifyTest, InjectedFaultIsCaught) {
  json cfg = SmallVerify();
  cfg["inject_fault"] = true;
  EXPECT_EQ(CodeOf([&] { RunInto("verify", cfg, "verify-fault"); }),
            ErrorCode::kVerificationFailed);
  const auto lines =
      Lines(fs::temp_directory_path() / "rnsim_experiments_test" / "verify-fault" / "verify.csv");
  int failing = 0;
  for (const auto& line : lines) {
    if (line.substr(line.rfind(',') + 1) == "FAIL") {
      ++failing;
      EXPECT_EQ(line.rfind("rns-equals-hp,", 0), 0u) << line;
    }
  }
  EXPECT_EQ(failing, 1);
}

TEST(AtomicWriteTest, ReplacesWholeFile) {
  const fs::path dir = Scratch("atomic");
  fs::create_directories(dir);
  WriteFileAtomic(dir / "f.txt", "first version\n");
  WriteFileAtomic(dir / "f.txt", "second\n");
  EXPECT_EQ(Slurp(dir / "f.txt"), "second\n");
  EXPECT_FALSE(fs::exists(dir / "f.txt.tmp"));
  EXPECT_THROW(WriteFileAtomic(dir / "missing" / "f.txt", "x"), Error);
}

}  // namespace
}  // namespace rnsim
