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

#ifndef PUSHGRID_SCENARIO_HPP_
#define PUSHGRID_SCENARIO_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pushgrid/geometry.hpp"
#include "pushgrid/grid.hpp"

namespace pushgrid {

enum class ObstacleKind { kRectangle, kCircle, kCross, kTShape, kLShape };

const char* to_string(ObstacleKind kind);
ObstacleKind obstacle_kind_from_string(std::string_view name);

// Body-frame footprint of a library obstacle at unit scale.
ShapeSpec obstacle_shape(ObstacleKind kind, double scale = 1.0);

struct ObstacleGroup {
  ObstacleKind kind = ObstacleKind::kRectangle;
  int count = 1;
  double scale_min = 0.8;
  double scale_max = 1.2;
};

enum class Phase { kTraining, kEvaluation };

struct ScenarioSpec {
  std::string name = "training";
  std::vector<ObstacleGroup> obstacles{ObstacleGroup{}};
  // Moving obstacles travel along y and bounce off the workspace edges.
  bool dynamic = false;
  double obstacle_speed = 0.1;
  int max_steps = 160;
  bool randomize = true;  // dynamics and scale randomization
  bool noise = true;      // observation noise
  bool terminate_on_collision = false;
  bool orientation_in_success = true;
  double corridor_half_width = 0.1;

  int grid_rows = 100;
  int grid_cols = 140;
  double resolution = kGridResolution;
  Vec2 origin;
  double object_size = 0.06;    // square side, meters
  double pusher_radius = 0.01;

  Workspace workspace() const {
    return Workspace::from_grid(grid_rows, grid_cols, resolution, origin);
  }
  int obstacle_count() const;
  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

inline constexpr int kTrainingEpisodeSteps = 160;
inline constexpr int kEvaluationEpisodeSteps = 200;

// Named suites: "training", "circular", "cross", "t_shape", "l_shape",
// "dual", "dynamic", plus "no_obstacle" for obstacle-free pushing.
// Throws ConfigError for an unknown name.
ScenarioSpec named_scenario(std::string_view name,
                            Phase phase = Phase::kEvaluation);
const std::vector<std::string>& evaluation_suite_names();
const std::vector<std::string>& scenario_names();

void to_json(nlohmann::json& j, const ScenarioSpec& s);
// Unknown keys and bad values raise ConfigError.
void from_json(const nlohmann::json& j, ScenarioSpec& s);

}  // namespace pushgrid

#endif  // PUSHGRID_SCENARIO_HPP_
