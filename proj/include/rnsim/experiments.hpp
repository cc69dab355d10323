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

// Experiment driver behind the command-line tool. A JSON config names the
// experiment and its parameters; every run writes CSV and JSON artifacts into
// an output directory and is a pure function of (config, seed).

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rnsim/error.hpp"

namespace rnsim {

// dot-error, energy, perr-curve, rrns-mc, noise-sweep, train, infer,
// hybrid-check, verify.
const std::vector<std::string>& ExperimentNames();

struct RunSettings {
  std::string experiment;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::filesystem::path out_dir = "out";
  // The config minus the common keys above.
  nlohmann::json params = nlohmann::json::object();
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<unsigned> threads;
};

// Throws kConfigInvalid for unreadable files and malformed JSON.
nlohmann::json LoadConfig(const std::filesystem::path& path);

// Splits the config into common settings and experiment parameters. The
// experiment is `subcommand` unless that is "run", in which case the config's
// "experiment" key names it; a config naming a different experiment than the
// subcommand is rejected. Output directory and thread count come from the
// flags, then RNSIM_OUT_DIR / RNSIM_THREADS, then the config.
// Throws kConfigInvalid.
RunSettings ResolveSettings(std::string_view subcommand, const nlohmann::json& config,
                            const RunOverrides& overrides);

struct RunReport {
  std::vector<std::filesystem::path> artifacts;  // in write order
};

// Validates every parameter first (kConfigInvalid), then runs. Check-style
// experiments throw kExperimentFailed or kVerificationFailed after writing
// their artifacts. A human-readable summary goes to `summary`.
RunReport RunExperiment(const RunSettings& settings, std::ostream& summary);

// 2 for kConfigInvalid, 1 for anything else.
int ExitCodeFor(const Error& error);

// Writes to a sibling temporary file, then renames over `path`.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace rnsim
