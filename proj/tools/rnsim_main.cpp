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

// rnsim <experiment> [--config FILE] [--seed N] [--out DIR] [--threads N]
// rnsim run --config FILE ...

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "rnsim/experiments.hpp"

namespace {

constexpr int kUsageExit = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residue-number-system analog accelerator workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "master seed, overrides the config");
    sub->add_option("--out", out_dir, "output directory, overrides the config");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    return sub;
  };
  add("run", "run the experiment named by the config's \"experiment\" key")
      ->get_option("--config")
      ->required();
  add("dot-error", "LP vs RNS dot-product error on random vectors");
  add("energy", "data-converter energy per dot product");
  add("perr-curve", "analytic output error probability of RRNS codes");
  add("rrns-mc", "Monte Carlo RRNS outcomes against the analytic model");
  add("noise-sweep", "inference accuracy under RRNS-protected residue errors");
  add("train", "train a small network on a simulated core");
  add("infer", "accuracy over a grid of cores, bit widths and tile sizes");
  add("hybrid-check", "hybrid RNS arithmetic against big integers");
  add("verify", "built-in oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  const std::string subcommand = app.get_subcommands().front()->get_name();
  try {
    const nlohmann::json config =
        config_path.empty() ? nlohmann::json::object() : rnsim::LoadConfig(config_path);
    rnsim::RunOverrides overrides;
    overrides.seed = seed;
    overrides.threads = threads;
    if (out_dir) overrides.out_dir = *out_dir;
    const rnsim::RunSettings settings = rnsim::ResolveSettings(subcommand, config, overrides);
    const rnsim::RunReport report = rnsim::RunExperiment(settings, std::cout);
    for (const auto& path : report.artifacts) std::cout << "wrote " << path.string() << "\n";
    return 0;
  } catch (const rnsim::Error& e) {
    std::cerr << "rnsim " << subcommand << ": " << e.what() << "\n";
    return rnsim::ExitCodeFor(e);
  } catch (const std::exception& e) {
    std::cerr << "rnsim " << subcommand << ": " << e.what() << "\n";
    return 1;
  }
}
