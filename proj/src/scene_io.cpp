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

#include "pushgrid/scene_io.hpp"

#include <fstream>

#include "pushgrid/error.hpp"

namespace pushgrid {

using nlohmann::json;

void to_json(json& j, const Vec2& v) { j = json::array({v.x, v.y}); }
void from_json(const json& j, Vec2& v) {
  if (!j.is_array() || j.size() != 2) throw FormatError("expected [x, y]");
  v = {j[0].get<double>(), j[1].get<double>()};
}

void to_json(json& j, const Pose2D& p) {
  j = json::array({p.x, p.y, p.theta});
}
void from_json(const json& j, Pose2D& p) {
  if (!j.is_array() || j.size() != 3) {
    throw FormatError("expected [x, y, theta]");
  }
  p = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void to_json(json& j, const ShapeSpec& s) {
  const auto polygon_json = [](const ConvexPolygon& p) {
    json verts = json::array();
    for (const Vec2& v : p.vertices) verts.push_back(v);
    return verts;
  };
  if (const auto* c = std::get_if<Circle>(&s.geometry)) {
    j = {{"kind", "circle"}, {"radius", c->radius}};
  } else if (const auto* p = std::get_if<ConvexPolygon>(&s.geometry)) {
    j = {{"kind", "convex_polygon"}, {"vertices", polygon_json(*p)}};
  } else {
    json parts = json::array();
    for (const auto& part : std::get<Composite>(s.geometry).parts) {
      parts.push_back(polygon_json(part));
    }
    j = {{"kind", "composite"}, {"parts", parts}};
  }
  j["scale"] = s.scale;
}

void from_json(const json& j, ShapeSpec& s) {
  const auto polygon_of = [](const json& verts) {
    ConvexPolygon p;
    for (const auto& v : verts) p.vertices.push_back(v.get<Vec2>());
    return p;
  };
  const std::string kind = j.at("kind").get<std::string>();
  const double scale = j.value("scale", 1.0);
  if (kind == "circle") {
    s = ShapeSpec::circle(j.at("radius").get<double>(), scale);
  } else if (kind == "convex_polygon") {
    s = ShapeSpec{polygon_of(j.at("vertices")), scale};
  } else if (kind == "composite") {
    std::vector<ConvexPolygon> parts;
    for (const auto& part : j.at("parts")) parts.push_back(polygon_of(part));
    s = ShapeSpec::composite(std::move(parts), scale);
  } else {
    throw FormatError("unknown shape kind '" + kind + "'");
  }
  s.validate();
}

void to_json(json& j, const PlacedShape& p) {
  j = p.shape;
  j["pose"] = p.pose;
}
void from_json(const json& j, PlacedShape& p) {
  p.shape = j.get<ShapeSpec>();
  p.pose = j.at("pose").get<Pose2D>();
}

void to_json(json& j, const Workspace& w) {
  j = {{"width", w.width}, {"height", w.height}, {"origin", w.origin}};
}
void from_json(const json& j, Workspace& w) {
  w.width = j.at("width").get<double>();
  w.height = j.at("height").get<double>();
  w.origin = j.value("origin", Vec2{});
}

void to_json(json& j, const SceneDescription& s) {
  j = {{"workspace", s.workspace},
       {"resolution", s.resolution},
       {"obstacles", s.obstacles}};
}
void from_json(const json& j, SceneDescription& s) {
  s.workspace = j.at("workspace").get<Workspace>();
  s.resolution = j.value("resolution", kGridResolution);
  s.obstacles = j.value("obstacles", std::vector<PlacedShape>{});
}

SceneDescription load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scene file " + path.string());
  try {
    return json::parse(in).get<SceneDescription>();
  } catch (const json::exception& e) {
    throw FormatError("malformed scene file " + path.string() + ": " +
                      e.what());
  }
}

void save_scene(const SceneDescription& scene,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << json(scene).dump(2) << '\n';
}

}  // namespace pushgrid
