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

#ifndef PUSHGRID_EVALBENCH_HPP_
#define PUSHGRID_EVALBENCH_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pushgrid/env.hpp"
#include "pushgrid/policy.hpp"
#include "pushgrid/scenario.hpp"

namespace pushgrid {

// State after one step of a recorded episode.
struct TrajectoryPoint {
  int step = 0;  // 1-based
  Action action;
  Pose2D pusher;
  Pose2D object;
  double reward = 0.0;
  bool collision = false;
  Termination termination = Termination::kNone;
};

// Everything needed to re-simulate an episode.
struct Trajectory {
  ScenarioSpec scenario;
  std::uint64_t seed = 0;        // episode seed passed to reset
  std::uint64_t noise_seed = 0;  // observation noise stream
  SceneState initial;
  std::vector<TrajectoryPoint> points;
};

struct EpisodeOutcome {
  Termination kind = Termination::kTimeout;  // never kNone
  int steps = 0;
  double final_pos_error = 0.0;  // m
  double final_ang_error = 0.0;  // rad
  double total_reward = 0.0;
  std::uint64_t seed = 0;
  std::optional<Trajectory> trajectory;
};

// Scripted controller for tests and baselines: action for the observation
// at `step` (0-based).
using Controller = std::function<Action(const Observation&, int step)>;

// Seed of episode `index` of a suite run on `scenario`.
std::uint64_t episode_seed(std::uint64_t seed, std::string_view scenario,
                           int index);

// Runs one episode until success, collision (when the scenario terminates on
// contact), boundary violation or the step limit.
EpisodeOutcome run_episode(const Controller& controller,
                           const ScenarioSpec& scenario, std::uint64_t seed,
                           bool record = false);
// Policy-driven episode. `deterministic` takes the per-axis mode; otherwise
// actions are sampled from a stream derived from `seed`.
EpisodeOutcome run_episode(Agent& agent, const ScenarioSpec& scenario,
                           std::uint64_t seed, bool deterministic,
                           bool record = false);
// Loads the agent first; throws FormatError or ArchitectureMismatch.
EpisodeOutcome run_episode(const std::filesystem::path& checkpoint,
                           const ScenarioSpec& scenario, std::uint64_t seed,
                           bool deterministic, bool record = false);

struct ScenarioMetrics {
  std::string scenario;
  int episodes = 0;
  int successes = 0;
  int collisions = 0;
  int timeouts = 0;
  int boundaries = 0;
  // Percentages and 95% normal-approximation half-widths.
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double boundary_rate = 0.0;
  double success_ci = 0.0;
  double collision_ci = 0.0;
  double timeout_ci = 0.0;
  double boundary_ci = 0.0;
  double mean_steps_to_success = 0.0;  // NaN without successes
};

ScenarioMetrics aggregate(const std::string& scenario,
                          std::span<const EpisodeOutcome> outcomes);
// 1.96 * sqrt(p (1 - p) / n), in percent.
double binomial_half_width(int hits, int trials);

struct MetricsReport {
  std::vector<ScenarioMetrics> scenarios;

  std::string to_csv() const;
  std::string to_table() const;
};

struct SuiteOptions {
  int episodes = 2000;
  std::uint64_t seed = 0;
  bool deterministic = true;
  int workers = 1;
  int record = 0;  // keep trajectories of the first `record` episodes
};

struct SuiteResult {
  MetricsReport report;
  std::vector<std::vector<EpisodeOutcome>> outcomes;  // per scenario
};

// Episodes run in fixed blocks of kEvalBlock with batched inference, so the
// outcome depends on the seed but not on the number of workers.
inline constexpr int kEvalBlock = 16;

// Throws InvalidInput for an empty scenario list or episodes < 1.
SuiteResult run_suite(Agent& agent, const std::vector<ScenarioSpec>& scenarios,
                      const SuiteOptions& options);
SuiteResult run_suite(const std::filesystem::path& checkpoint,
                      const std::vector<ScenarioSpec>& scenarios,
                      const SuiteOptions& options);

enum class TrajectoryFormat { kCsv, kNdjson };
// Throws InvalidInput for anything but "csv" or "ndjson".
TrajectoryFormat trajectory_format_from_string(std::string_view name);

// CSV: one header line and one row per step, for plotting. NDJSON: a header
// object with scenario, seeds and initial state, then one object per step;
// only NDJSON can be replayed. Output is a pure function of the outcome.
std::string format_trajectory(const Trajectory& trajectory,
                              TrajectoryFormat format);
// Throws ProtocolError when the outcome has no trajectory.
void export_trajectory(const EpisodeOutcome& outcome, TrajectoryFormat format,
                       const std::filesystem::path& path);

// Parses an NDJSON export; throws FormatError on malformed input.
Trajectory parse_trajectory(std::string_view text);
Trajectory read_trajectory(const std::filesystem::path& path);

struct ReplayReport {
  int steps = 0;
  double max_position_divergence = 0.0;  // m, pusher and object
  double max_angle_divergence = 0.0;     // rad
  double max_reward_divergence = 0.0;
  bool terminations_match = true;
  Trajectory replayed;
};

// Re-simulates from the initial state with the logged actions.
ReplayReport replay_trajectory(const Trajectory& trajectory);

void to_json(nlohmann::json& j, const ScenarioMetrics& m);

}  // namespace pushgrid

#endif  // PUSHGRID_EVALBENCH_HPP_
