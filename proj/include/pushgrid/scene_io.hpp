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

#ifndef PUSHGRID_SCENE_IO_HPP_
#define PUSHGRID_SCENE_IO_HPP_

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "pushgrid/geometry.hpp"
#include "pushgrid/grid.hpp"

namespace pushgrid {

// JSON scene description: workspace, resolution and obstacle list.
struct SceneDescription {
  Workspace workspace;
  double resolution = kGridResolution;
  std::vector<PlacedShape> obstacles;
};

void to_json(nlohmann::json& j, const Vec2& v);
void from_json(const nlohmann::json& j, Vec2& v);
void to_json(nlohmann::json& j, const Pose2D& p);
void from_json(const nlohmann::json& j, Pose2D& p);
void to_json(nlohmann::json& j, const ShapeSpec& s);
void from_json(const nlohmann::json& j, ShapeSpec& s);
void to_json(nlohmann::json& j, const PlacedShape& p);
void from_json(const nlohmann::json& j, PlacedShape& p);
void to_json(nlohmann::json& j, const Workspace& w);
void from_json(const nlohmann::json& j, Workspace& w);
void to_json(nlohmann::json& j, const SceneDescription& s);
void from_json(const nlohmann::json& j, SceneDescription& s);

// Throws FormatError on unreadable or malformed files.
SceneDescription load_scene(const std::filesystem::path& path);
void save_scene(const SceneDescription& scene,
                const std::filesystem::path& path);

}  // namespace pushgrid

#endif  // PUSHGRID_SCENE_IO_HPP_
