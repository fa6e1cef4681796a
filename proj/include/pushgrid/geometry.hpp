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

#ifndef PUSHGRID_GEOMETRY_HPP_
#define PUSHGRID_GEOMETRY_HPP_

#include <cmath>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

namespace pushgrid {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
// Counter-clockwise quarter turn.
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }
inline Vec2 rotate(Vec2 a, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

// Maps any finite angle into (-pi, pi].
double wrap_angle(double angle);

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta);
  }
  // Body-frame point to world frame.
  Vec2 to_world(Vec2 body) const { return rotate(body, theta) + position(); }
  Pose2D normalized() const { return {x, y, wrap_angle(theta)}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

struct Circle {
  double radius = 0.0;
};

// Body-frame vertices, counter-clockwise, strictly convex.
struct ConvexPolygon {
  std::vector<Vec2> vertices;
};

// Union of convex parts; used for cross, T and L footprints.
struct Composite {
  std::vector<ConvexPolygon> parts;
};

struct ShapeSpec {
  std::variant<Circle, ConvexPolygon, Composite> geometry;
  double scale = 1.0;

  static ShapeSpec circle(double radius, double scale = 1.0);
  static ShapeSpec polygon(std::vector<Vec2> vertices, double scale = 1.0);
  // Axis-aligned rectangle centered on the body origin.
  static ShapeSpec rectangle(double width, double height, double scale = 1.0);
  static ShapeSpec composite(std::vector<ConvexPolygon> parts,
                             double scale = 1.0);

  bool is_circle() const { return std::holds_alternative<Circle>(geometry); }
  // Throws InvalidInput when an invariant is violated.
  void validate() const;
};

struct PlacedShape {
  ShapeSpec shape;
  Pose2D pose;
};

// Convex part of a footprint expressed in world coordinates.
struct WorldCircle {
  Vec2 center;
  double radius = 0.0;
};
struct WorldPolygon {
  std::vector<Vec2> vertices;
};
using WorldPart = std::variant<WorldCircle, WorldPolygon>;

struct Aabb {
  Vec2 min;
  Vec2 max;
};

struct Footprint {
  std::vector<WorldPart> parts;
  Aabb bounds() const;
};

Footprint footprint(const ShapeSpec& shape, const Pose2D& pose);
inline Footprint footprint(const PlacedShape& placed) {
  return footprint(placed.shape, placed.pose);
}

struct Workspace {
  double width = 0.0;
  double height = 0.0;
  Vec2 origin;  // lower-left corner

  static Workspace from_grid(int rows, int cols, double resolution,
                             Vec2 origin = {});
  Vec2 center() const { return origin + Vec2{0.5 * width, 0.5 * height}; }
  double diagonal() const { return std::hypot(width, height); }
  double x_max() const { return origin.x + width; }
  double y_max() const { return origin.y + height; }
};

// Signed distance from a point to a convex part boundary (negative inside).
double signed_distance(const WorldPart& part, Vec2 point);
double signed_distance(const Footprint& shape, Vec2 point);
bool contains(const Footprint& shape, Vec2 point);

// Closest point on a convex polygon boundary.
struct BoundaryPoint {
  Vec2 point;
  double signed_distance = 0.0;
};
BoundaryPoint closest_boundary_point(const WorldPolygon& polygon, Vec2 point);

// Minimum distance between footprints; negative when they overlap (then the
// magnitude is the smallest separating-axis overlap, a penetration estimate).
double distance(const Footprint& a, const Footprint& b);

// Numeric slack below which interpenetration is treated as touching.
inline constexpr double kContactSlack = 1e-9;

// True iff the footprints come closer than `tolerance`.
bool collide(const PlacedShape& a, const PlacedShape& b,
             double tolerance = 0.0);
bool collide(const Footprint& a, const Footprint& b, double tolerance = 0.0);

// True iff the whole footprint lies inside the workspace rectangle.
bool in_workspace(const ShapeSpec& shape, const Pose2D& pose,
                  const Workspace& workspace);
bool in_workspace(const Footprint& shape, const Workspace& workspace);

}  // namespace pushgrid

#endif  // PUSHGRID_GEOMETRY_HPP_
