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

#include "pushgrid/geometry.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "pushgrid/error.hpp"

namespace pushgrid {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

void validate_polygon(const ConvexPolygon& polygon) {
  const auto& v = polygon.vertices;
  if (v.size() < 3) throw InvalidInput("polygon needs at least 3 vertices");
  for (const Vec2& p : v) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidInput("polygon vertex is not finite");
    }
  }
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v[i], b = v[(i + 1) % n], c = v[(i + 2) % n];
    if (cross(b - a, c - b) <= 0.0) {
      throw InvalidInput(
          "polygon vertices must be counter-clockwise and strictly convex");
    }
  }
}

// Interval of a polygon's vertices projected on an axis.
std::pair<double, double> project(const std::vector<Vec2>& v, Vec2 axis) {
  double lo = kInf, hi = -kInf;
  for (const Vec2& p : v) {
    const double d = dot(p, axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

// Smallest overlap over the edge normals of both polygons; <= 0 means a
// separating axis exists.
double min_axis_overlap(const WorldPolygon& a, const WorldPolygon& b) {
  double best = kInf;
  for (const WorldPolygon* poly : {&a, &b}) {
    const auto& v = poly->vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vec2 edge = v[(i + 1) % v.size()] - v[i];
      const double len = norm(edge);
      const Vec2 axis = (1.0 / len) * Vec2{edge.y, -edge.x};
      const auto [alo, ahi] = project(a.vertices, axis);
      const auto [blo, bhi] = project(b.vertices, axis);
      best = std::min(best, std::min(ahi - blo, bhi - alo));
      if (best <= 0.0) return best;
    }
  }
  return best;
}

double polygon_distance(const WorldPolygon& a, const WorldPolygon& b) {
  const double overlap = min_axis_overlap(a, b);
  if (overlap > 0.0) return -overlap;
  double best = kInf;
  const auto vertex_edge = [&best](const WorldPolygon& p,
                                   const WorldPolygon& q) {
    const auto& e = q.vertices;
    for (const Vec2& v : p.vertices) {
      for (std::size_t i = 0; i < e.size(); ++i) {
        best = std::min(best,
                        point_segment_distance(v, e[i], e[(i + 1) % e.size()]));
      }
    }
  };
  vertex_edge(a, b);
  vertex_edge(b, a);
  return best;
}

double part_distance(const WorldPart& a, const WorldPart& b) {
  if (const auto* ca = std::get_if<WorldCircle>(&a)) {
    return signed_distance(b, ca->center) - ca->radius;
  }
  if (const auto* cb = std::get_if<WorldCircle>(&b)) {
    return signed_distance(a, cb->center) - cb->radius;
  }
  return polygon_distance(std::get<WorldPolygon>(a),
                          std::get<WorldPolygon>(b));
}

}  // namespace

double wrap_angle(double angle) {
  constexpr double kPi = std::numbers::pi;
  double wrapped = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

ShapeSpec ShapeSpec::circle(double radius, double scale) {
  return ShapeSpec{Circle{radius}, scale};
}

ShapeSpec ShapeSpec::polygon(std::vector<Vec2> vertices, double scale) {
  return ShapeSpec{ConvexPolygon{std::move(vertices)}, scale};
}

ShapeSpec ShapeSpec::rectangle(double width, double height, double scale) {
  const double hw = 0.5 * width, hh = 0.5 * height;
  return polygon({{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}, scale);
}

ShapeSpec ShapeSpec::composite(std::vector<ConvexPolygon> parts,
                               double scale) {
  return ShapeSpec{Composite{std::move(parts)}, scale};
}

void ShapeSpec::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidInput("shape scale must be positive");
  }
  if (const auto* c = std::get_if<Circle>(&geometry)) {
    if (!(c->radius > 0.0) || !std::isfinite(c->radius)) {
      throw InvalidInput("circle radius must be positive");
    }
  } else if (const auto* p = std::get_if<ConvexPolygon>(&geometry)) {
    validate_polygon(*p);
  } else {
    const auto& parts = std::get<Composite>(geometry).parts;
    if (parts.empty()) throw InvalidInput("composite shape has no parts");
    for (const auto& part : parts) validate_polygon(part);
  }
}

Aabb Footprint::bounds() const {
  Aabb box{{kInf, kInf}, {-kInf, -kInf}};
  const auto grow = [&box](Vec2 lo, Vec2 hi) {
    box.min = {std::min(box.min.x, lo.x), std::min(box.min.y, lo.y)};
    box.max = {std::max(box.max.x, hi.x), std::max(box.max.y, hi.y)};
  };
  for (const WorldPart& part : parts) {
    if (const auto* c = std::get_if<WorldCircle>(&part)) {
      const Vec2 r{c->radius, c->radius};
      grow(c->center - r, c->center + r);
    } else {
      for (const Vec2& v : std::get<WorldPolygon>(part).vertices) grow(v, v);
    }
  }
  return box;
}

Footprint footprint(const ShapeSpec& shape, const Pose2D& pose) {
  if (!pose.finite()) throw InvalidInput("pose is not finite");
  Footprint out;
  const auto place = [&](const ConvexPolygon& polygon) {
    WorldPolygon world;
    world.vertices.reserve(polygon.vertices.size());
    for (const Vec2& v : polygon.vertices) {
      world.vertices.push_back(pose.to_world(shape.scale * v));
    }
    out.parts.emplace_back(std::move(world));
  };
  if (const auto* c = std::get_if<Circle>(&shape.geometry)) {
    out.parts.emplace_back(
        WorldCircle{pose.position(), shape.scale * c->radius});
  } else if (const auto* p = std::get_if<ConvexPolygon>(&shape.geometry)) {
    place(*p);
  } else {
    for (const auto& part : std::get<Composite>(shape.geometry).parts) {
      place(part);
    }
  }
  return out;
}

Workspace Workspace::from_grid(int rows, int cols, double resolution,
                               Vec2 origin) {
  return Workspace{cols * resolution, rows * resolution, origin};
}

BoundaryPoint closest_boundary_point(const WorldPolygon& polygon,
                                     Vec2 point) {
  const auto& v = polygon.vertices;
  BoundaryPoint best{{}, kInf};
  bool inside = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i], b = v[(i + 1) % v.size()];
    if (cross(b - a, point - a) < 0.0) inside = false;
    const Vec2 ab = b - a;
    const double t = std::clamp(dot(point - a, ab) / dot(ab, ab), 0.0, 1.0);
    const Vec2 q = a + t * ab;
    const double d = norm(point - q);
    if (d < best.signed_distance) best = {q, d};
  }
  if (inside) best.signed_distance = -best.signed_distance;
  return best;
}

double signed_distance(const WorldPart& part, Vec2 point) {
  if (const auto* c = std::get_if<WorldCircle>(&part)) {
    return norm(point - c->center) - c->radius;
  }
  return closest_boundary_point(std::get<WorldPolygon>(part), point)
      .signed_distance;
}

double signed_distance(const Footprint& shape, Vec2 point) {
  double best = kInf;
  for (const WorldPart& part : shape.parts) {
    best = std::min(best, signed_distance(part, point));
  }
  return best;
}

bool contains(const Footprint& shape, Vec2 point) {
  for (const WorldPart& part : shape.parts) {
    if (const auto* c = std::get_if<WorldCircle>(&part)) {
      const Vec2 d = point - c->center;
      if (dot(d, d) <= c->radius * c->radius) return true;
      continue;
    }
    const auto& v = std::get<WorldPolygon>(part).vertices;
    bool inside = true;
    for (std::size_t i = 0; i < v.size() && inside; ++i) {
      inside = cross(v[(i + 1) % v.size()] - v[i], point - v[i]) >= 0.0;
    }
    if (inside) return true;
  }
  return false;
}

double distance(const Footprint& a, const Footprint& b) {
  double best = kInf;
  for (const WorldPart& pa : a.parts) {
    for (const WorldPart& pb : b.parts) {
      best = std::min(best, part_distance(pa, pb));
    }
  }
  return best;
}

bool collide(const Footprint& a, const Footprint& b, double tolerance) {
  const Aabb ba = a.bounds(), bb = b.bounds();
  const double gap = std::max({ba.min.x - bb.max.x, bb.min.x - ba.max.x,
                               ba.min.y - bb.max.y, bb.min.y - ba.max.y});
  if (gap >= tolerance) return false;
  return distance(a, b) < tolerance - kContactSlack;
}

bool collide(const PlacedShape& a, const PlacedShape& b, double tolerance) {
  return collide(footprint(a), footprint(b), tolerance);
}

bool in_workspace(const Footprint& shape, const Workspace& workspace) {
  const Aabb box = shape.bounds();
  return box.min.x >= workspace.origin.x && box.min.y >= workspace.origin.y &&
         box.max.x <= workspace.x_max() && box.max.y <= workspace.y_max();
}

bool in_workspace(const ShapeSpec& shape, const Pose2D& pose,
                  const Workspace& workspace) {
  return in_workspace(footprint(shape, pose), workspace);
}

}  // namespace pushgrid
