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

#include "pushgrid/scenario.hpp"

#include <algorithm>
#include <set>

#include "pushgrid/error.hpp"
#include "pushgrid/scene_io.hpp"

namespace pushgrid {
namespace {

ConvexPolygon box(double x0, double y0, double x1, double y1) {
  return ConvexPolygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

}  // namespace

const char* to_string(ObstacleKind kind) {
  switch (kind) {
    case ObstacleKind::kRectangle:
      return "rectangle";
    case ObstacleKind::kCircle:
      return "circle";
    case ObstacleKind::kCross:
      return "cross";
    case ObstacleKind::kTShape:
      return "t_shape";
    case ObstacleKind::kLShape:
      return "l_shape";
  }
  return "unknown";
}

ObstacleKind obstacle_kind_from_string(std::string_view name) {
  for (ObstacleKind k : {ObstacleKind::kRectangle, ObstacleKind::kCircle,
                         ObstacleKind::kCross, ObstacleKind::kTShape,
                         ObstacleKind::kLShape}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("kind", "unknown obstacle kind '" + std::string(name) +
                                "'");
}

ShapeSpec obstacle_shape(ObstacleKind kind, double scale) {
  switch (kind) {
    case ObstacleKind::kRectangle:
      return ShapeSpec::rectangle(0.16, 0.04, scale);
    case ObstacleKind::kCircle:
      return ShapeSpec::circle(0.045, scale);
    case ObstacleKind::kCross:
      return ShapeSpec::composite({box(-0.075, -0.02, 0.075, 0.02),
                                   box(-0.02, 0.02, 0.02, 0.075),
                                   box(-0.02, -0.075, 0.02, -0.02)},
                                  scale);
    case ObstacleKind::kTShape:
      return ShapeSpec::composite(
          {box(-0.075, 0.025, 0.075, 0.065), box(-0.02, -0.075, 0.02, 0.025)},
          scale);
    case ObstacleKind::kLShape:
      return ShapeSpec::composite(
          {box(-0.06, -0.07, -0.02, 0.07), box(-0.02, -0.07, 0.07, -0.03)},
          scale);
  }
  throw InvalidInput("unknown obstacle kind");
}

int ScenarioSpec::obstacle_count() const {
  int n = 0;
  for (const auto& g : obstacles) n += g.count;
  return n;
}

void ScenarioSpec::validate() const {
  for (const auto& g : obstacles) {
    if (g.count < 0) throw ConfigError("count", "must be >= 0");
    if (!(g.scale_min > 0.0) || g.scale_max < g.scale_min) {
      throw ConfigError("scale", "need 0 < scale_min <= scale_max");
    }
  }
  if (max_steps < 1) throw ConfigError("max_steps", "must be >= 1");
  if (!(obstacle_speed >= 0.0)) {
    throw ConfigError("obstacle_speed", "must be >= 0");
  }
  if (!(corridor_half_width > 0.0)) {
    throw ConfigError("corridor_half_width", "must be positive");
  }
  if (grid_rows < 1 || grid_cols < 1) {
    throw ConfigError("grid_rows", "grid dimensions must be positive");
  }
  if (!(resolution > 0.0)) throw ConfigError("resolution", "must be positive");
  if (!(object_size > 0.0)) throw ConfigError("object_size", "must be positive");
  if (!(pusher_radius > 0.0)) {
    throw ConfigError("pusher_radius", "must be positive");
  }
}

const std::vector<std::string>& evaluation_suite_names() {
  static const std::vector<std::string> names{
      "training", "circular", "cross", "t_shape", "l_shape", "dual", "dynamic"};
  return names;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    auto n = evaluation_suite_names();
    n.push_back("no_obstacle");
    return n;
  }();
  return names;
}

ScenarioSpec named_scenario(std::string_view name, Phase phase) {
  ScenarioSpec s;
  s.name = std::string(name);
  const auto single = [&s](ObstacleKind kind) {
    s.obstacles = {ObstacleGroup{kind, 1, 0.8, 1.2}};
  };
  if (name == "training") {
    single(ObstacleKind::kRectangle);
  } else if (name == "circular") {
    single(ObstacleKind::kCircle);
  } else if (name == "cross") {
    single(ObstacleKind::kCross);
  } else if (name == "t_shape") {
    single(ObstacleKind::kTShape);
  } else if (name == "l_shape") {
    single(ObstacleKind::kLShape);
  } else if (name == "dual") {
    s.obstacles = {ObstacleGroup{ObstacleKind::kRectangle, 2, 0.8, 1.2}};
  } else if (name == "dynamic") {
    single(ObstacleKind::kRectangle);
    s.dynamic = true;
  } else if (name == "no_obstacle") {
    s.obstacles.clear();
  } else {
    std::string known;
    for (const auto& n : scenario_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("scenario", "unknown scenario '" + std::string(name) +
                                      "' (known: " + known + ")");
  }
  if (phase == Phase::kEvaluation) {
    s.max_steps = kEvaluationEpisodeSteps;
    s.terminate_on_collision = true;
  } else {
    s.max_steps = kTrainingEpisodeSteps;
    s.terminate_on_collision = false;
  }
  return s;
}

void to_json(nlohmann::json& j, const ScenarioSpec& s) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : s.obstacles) {
    groups.push_back({{"kind", to_string(g.kind)},
                      {"count", g.count},
                      {"scale", {g.scale_min, g.scale_max}}});
  }
  j = {{"name", s.name},
       {"obstacles", groups},
       {"dynamic", s.dynamic},
       {"obstacle_speed", s.obstacle_speed},
       {"max_steps", s.max_steps},
       {"randomize", s.randomize},
       {"noise", s.noise},
       {"terminate_on_collision", s.terminate_on_collision},
       {"orientation_in_success", s.orientation_in_success},
       {"corridor_half_width", s.corridor_half_width},
       {"grid_rows", s.grid_rows},
       {"grid_cols", s.grid_cols},
       {"resolution", s.resolution},
       {"origin", s.origin},
       {"object_size", s.object_size},
       {"pusher_radius", s.pusher_radius}};
}

void from_json(const nlohmann::json& j, ScenarioSpec& s) {
  if (!j.is_object()) throw ConfigError("scenario", "expected an object");
  // A "base" names a library scenario whose fields the others override.
  if (j.contains("base")) {
    if (!j["base"].is_string()) throw ConfigError("base", "expected a string");
    const std::string phase = j.value("phase", "training");
    if (phase != "training" && phase != "evaluation") {
      throw ConfigError("phase", "expected 'training' or 'evaluation'");
    }
    s = named_scenario(j["base"].get<std::string>(),
                       phase == "training" ? Phase::kTraining
                                           : Phase::kEvaluation);
  }
  static const std::set<std::string> kKeys{
      "base", "phase", "name", "obstacles", "dynamic", "obstacle_speed",
      "max_steps", "randomize", "noise", "terminate_on_collision",
      "orientation_in_success", "corridor_half_width", "grid_rows",
      "grid_cols", "resolution", "origin", "object_size", "pusher_radius"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError(key, "unknown scenario key");
  }
  const auto read = [&j]<typename T>(const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
  read("name", s.name);
  read("dynamic", s.dynamic);
  read("obstacle_speed", s.obstacle_speed);
  read("max_steps", s.max_steps);
  read("randomize", s.randomize);
  read("noise", s.noise);
  read("terminate_on_collision", s.terminate_on_collision);
  read("orientation_in_success", s.orientation_in_success);
  read("corridor_half_width", s.corridor_half_width);
  read("grid_rows", s.grid_rows);
  read("grid_cols", s.grid_cols);
  read("resolution", s.resolution);
  read("object_size", s.object_size);
  read("pusher_radius", s.pusher_radius);
  if (j.contains("origin")) {
    try {
      s.origin = j["origin"].get<Vec2>();
    } catch (const std::exception& e) {
      throw ConfigError("origin", e.what());
    }
  }
  if (j.contains("obstacles")) {
    if (!j["obstacles"].is_array()) {
      throw ConfigError("obstacles", "expected an array");
    }
    s.obstacles.clear();
    for (const auto& g : j["obstacles"]) {
      ObstacleGroup group;
      try {
        group.kind = obstacle_kind_from_string(g.at("kind").get<std::string>());
        group.count = g.value("count", 1);
        if (g.contains("scale")) {
          group.scale_min = g["scale"].at(0).get<double>();
          group.scale_max = g["scale"].at(1).get<double>();
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("obstacles", e.what());
      }
      s.obstacles.push_back(group);
    }
  }
  s.validate();
}

}  // namespace pushgrid
