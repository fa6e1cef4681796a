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

#ifndef PUSHGRID_ENV_HPP_
#define PUSHGRID_ENV_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "pushgrid/dynamics.hpp"
#include "pushgrid/geometry.hpp"
#include "pushgrid/grid.hpp"
#include "pushgrid/parallel.hpp"
#include "pushgrid/rng.hpp"
#include "pushgrid/scenario.hpp"

namespace pushgrid {

inline constexpr double kControlPeriod = 0.1;  // seconds, 10 Hz policy
inline constexpr int kActionBins = 11;
inline constexpr double kVelocityStep = 0.02;
inline constexpr double kSuccessPositionTolerance = 0.015;
inline constexpr double kSuccessAngleTolerance = std::numbers::pi / 6;

// Reward constants.
inline constexpr double kSuccessReward = 50.0;
inline constexpr double kBoundaryReward = -10.0;
inline constexpr double kCollisionPenalty = -5.0;
inline constexpr double kDistanceWeight = 0.1;
inline constexpr double kAngleWeight = 0.02;

struct Obstacle {
  PlacedShape body;
  Vec2 velocity;  // nonzero only for moving obstacles
};

struct SceneState {
  Workspace workspace;
  Pose2D pusher_pose;  // theta unused
  Pose2D object_pose;
  Pose2D target_pose;
  std::vector<Obstacle> obstacles;
  ShapeSpec pusher_shape;
  ShapeSpec object_shape;
  DynamicsParams params;
  int step_count = 0;

  std::vector<PlacedShape> obstacle_bodies() const;
};

struct Observation {
  Pose2D object_pose;  // noisy
  Pose2D target_pose;
  Vec2 pusher_pos;  // noisy
  std::shared_ptr<const OccupancyGrid> grid;
  std::shared_ptr<const PatchSet> patches;
};

struct Action {
  int bin_x = 5;
  int bin_y = 5;
  friend bool operator==(const Action&, const Action&) = default;
};

struct NoiseModel {
  double position_sigma = 0.001;  // m
  double angle_sigma = 0.02;      // rad
  bool enabled = true;
};

enum class Termination { kNone, kSuccess, kCollision, kTimeout, kBoundary };
const char* to_string(Termination t);

struct StepInfo {
  bool collision = false;  // pusher or object touches an obstacle
  bool success = false;
  bool boundary = false;
  bool timeout = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  Termination termination = Termination::kNone;
  StepInfo info;
};

// Pusher velocity for a pair of bins: -0.1 + 0.02 * bin per axis.
// Throws InvalidAction for bins outside [0, 10].
Vec2 decode_action(const Action& action);

// Distance and angle terms, each normalized to [0, 1].
struct RewardTerms {
  double distance = 0.0;
  double angle = 0.0;
};
RewardTerms reward_terms(const SceneState& state);

bool in_collision(const SceneState& state);
double position_error(const SceneState& state);
double angle_error(const SceneState& state);

double compute_reward(const SceneState& after, Termination terminal,
                      bool collision);
double compute_reward(const SceneState& after, Termination terminal);

// One pushing episode at a time. Not thread-safe; instances are independent.
class PushEnv {
 public:
  explicit PushEnv(ScenarioSpec scenario);

  // Samples dynamics, shapes and poses from `seed` and starts an episode.
  // Throws ScenarioInfeasible after 1000 rejected samples.
  Observation reset(std::uint64_t seed);

  // Throws ProtocolError when called before reset or after the episode ended.
  StepResult step(const Action& action);

  // Starts an episode from a given state (replay); the noise stream is
  // seeded from `noise_seed`.
  Observation restore(const SceneState& state, std::uint64_t noise_seed);

  const SceneState& state() const { return state_; }
  const ScenarioSpec& scenario() const { return scenario_; }
  bool done() const { return done_; }
  std::shared_ptr<const OccupancyGrid> grid() const { return grid_; }

  // Serializable snapshot including noise offsets and engine state.
  nlohmann::json snapshot() const;
  void load_snapshot(const nlohmann::json& j);

 private:
  void sample_episode(Rng& rng);
  void rebuild_grid();
  Observation observe();

  ScenarioSpec scenario_;
  NoiseModel noise_;
  double unit_limit_surface_ = 0.0;
  SceneState state_;
  Rng noise_rng_;
  std::array<double, 5> offsets_{};  // object x, y, theta; pusher x, y
  std::shared_ptr<const OccupancyGrid> grid_;
  std::shared_ptr<const PatchSet> patches_;
  bool done_ = true;
};

// Batched environments with automatic reset. Episode seeds are derived from
// (seed, env index, episode counter) so results do not depend on `workers`.
class VectorEnv {
 public:
  VectorEnv(const ScenarioSpec& scenario, int num_envs, std::uint64_t seed,
            int workers = 1);

  int size() const { return static_cast<int>(envs_.size()); }
  std::vector<Observation> reset_all();

  struct Batch {
    std::vector<StepResult> results;
    // Observation to act on next: the reset observation where done.
    std::vector<Observation> next;
  };
  // Throws BatchError when actions.size() != size().
  Batch step(std::span<const Action> actions);

  PushEnv& env(int i) { return envs_[i]; }
  const PushEnv& env(int i) const { return envs_[i]; }
  const std::vector<Observation>& current() const { return current_; }

  nlohmann::json snapshot() const;
  void load_snapshot(const nlohmann::json& j);

 private:
  std::uint64_t next_seed(int env);

  std::uint64_t seed_;
  std::vector<PushEnv> envs_;
  std::vector<std::uint64_t> episodes_;
  std::vector<Observation> current_;
  std::unique_ptr<WorkerPool> pool_;
};

void to_json(nlohmann::json& j, const SceneState& s);
void from_json(const nlohmann::json& j, SceneState& s);
void to_json(nlohmann::json& j, const DynamicsParams& p);
void from_json(const nlohmann::json& j, DynamicsParams& p);

}  // namespace pushgrid

#endif  // PUSHGRID_ENV_HPP_
