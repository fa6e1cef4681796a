// Copyright 2026 The pushgrid Authors
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

#ifndef PUSHGRID_TOOLS_CLI_HPP_
#define PUSHGRID_TOOLS_CLI_HPP_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pushgrid/ppo.hpp"
#include "pushgrid/scenario.hpp"

namespace pushgrid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;     // bad flags, config or input file
inline constexpr int kExitMismatch = 3;  // checkpoint does not fit
inline constexpr int kExitFault = 4;     // failure while running

// Everything a training run depends on. Serialized into the run directory
// as config.json, which can be passed back with --config.
struct RunConfig {
  TrainConfig train;
  ScenarioSpec scenario = named_scenario("training", Phase::kTraining);
  std::string output_root;  // empty: PUSHGRID_OUT_DIR or "runs"
};

// Keys: "train" (TrainConfig fields), "scenario" (library name or scenario
// object), "noise" and "randomize" (scenario toggles), "output_root".
// Unknown keys raise ConfigError with a dotted key path.
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
// Throws ConfigError("config", ...) naming the path when unreadable.
RunConfig load_run_config(const std::filesystem::path& path);

// Entry point; args excludes the program name. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace pushgrid::cli

#endif  // PUSHGRID_TOOLS_CLI_HPP_
