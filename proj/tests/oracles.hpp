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

// Independent reference implementations used only by tests. None of these
// call into the code paths they check.
#ifndef PUSHGRID_TESTS_ORACLES_HPP_
#define PUSHGRID_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <variant>
#include <vector>

#include "pushgrid/dynamics.hpp"
#include "pushgrid/geometry.hpp"
#include "pushgrid/grid.hpp"

namespace pushgrid::oracle {

// Crossing-number point-in-polygon test over world vertices.
inline bool point_in_polygon(const std::vector<Vec2>& v, Vec2 p) {
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double x_cross =
          v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

// World vertices of every convex part, computed with explicit trig.
inline std::vector<std::vector<Vec2>> world_polygons(const ShapeSpec& shape,
                                                     const Pose2D& pose) {
  std::vector<std::vector<Vec2>> out;
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const auto place = [&](const ConvexPolygon& poly) {
    std::vector<Vec2> w;
    for (const Vec2& b : poly.vertices) {
      const double x = shape.scale * b.x, y = shape.scale * b.y;
      w.push_back({pose.x + c * x - s * y, pose.y + s * x + c * y});
    }
    out.push_back(w);
  };
  if (const auto* p = std::get_if<ConvexPolygon>(&shape.geometry)) place(*p);
  if (const auto* comp = std::get_if<Composite>(&shape.geometry)) {
    for (const auto& part : comp->parts) place(part);
  }
  return out;
}

inline bool point_in_shape(const ShapeSpec& shape, const Pose2D& pose,
                           Vec2 p) {
  if (const auto* circle = std::get_if<Circle>(&shape.geometry)) {
    const double r = shape.scale * circle->radius;
    return std::hypot(p.x - pose.x, p.y - pose.y) <= r;
  }
  for (const auto& poly : world_polygons(shape, pose)) {
    if (point_in_polygon(poly, p)) return true;
  }
  return false;
}

// Brute-force grid: every cell center tested against every obstacle.
inline std::vector<std::uint8_t> brute_force_grid(
    const std::vector<PlacedShape>& obstacles, int rows, int cols,
    double resolution, Vec2 origin) {
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(rows) * cols, 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Vec2 center{origin.x + (c + 0.5) * resolution,
                        origin.y + (rows - r - 0.5) * resolution};
      for (const auto& o : obstacles) {
        if (point_in_shape(o.shape, o.pose, center)) {
          cells[r * cols + c] = 1;
          break;
        }
      }
    }
  }
  return cells;
}

// Random obstacle clutter mixing circles, boxes, triangles and composites.
inline std::vector<PlacedShape> random_scene(std::mt19937_64& rng,
                                             const Workspace& ws) {
  std::uniform_real_distribution<double> ux(ws.origin.x - 0.05,
                                            ws.x_max() + 0.05);
  std::uniform_real_distribution<double> uy(ws.origin.y - 0.05,
                                            ws.y_max() + 0.05);
  std::uniform_real_distribution<double> ut(-std::numbers::pi,
                                            std::numbers::pi);
  std::uniform_real_distribution<double> size(0.01, 0.15);
  std::uniform_int_distribution<int> count(0, 5), kind(0, 3);
  std::vector<PlacedShape> out;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    ShapeSpec shape;
    switch (kind(rng)) {
      case 0:
        shape = ShapeSpec::circle(0.5 * size(rng));
        break;
      case 1:
        shape = ShapeSpec::rectangle(size(rng), size(rng));
        break;
      case 2: {
        const double a = size(rng), b = size(rng);
        shape = ShapeSpec::polygon({{-a, -b / 3}, {a, -b / 3}, {0, 2 * b / 3}});
        break;
      }
      default: {
        const double a = size(rng), w = 0.3 * size(rng);
        shape = ShapeSpec::composite(
            {ConvexPolygon{{{-a, -w}, {a, -w}, {a, w}, {-a, w}}},
             ConvexPolygon{{{-w, w}, {w, w}, {w, w + a}, {-w, w + a}}}});
      }
    }
    shape.scale = std::uniform_real_distribution<double>(0.8, 1.2)(rng);
    shape.validate();
    out.push_back({shape, {ux(rng), uy(rng), ut(rng)}});
  }
  return out;
}

// A single randomized push: rectangular slider, circular pusher placed just
// outside a random boundary point, velocity drawn mostly toward the object.
struct RandomPush {
  ShapeSpec pusher_shape;
  ShapeSpec object_shape;
  DynamicsParams params;
  PushState state;
  Vec2 velocity;
};

inline RandomPush random_push(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * u01(rng);
  };
  RandomPush push;
  const double w = uniform(0.04, 0.09), h = uniform(0.04, 0.09);
  push.object_shape = ShapeSpec::rectangle(w, h);
  push.pusher_shape = ShapeSpec::circle(uniform(0.008, 0.015));
  push.params.static_friction = uniform(0.5, 0.7);
  push.params.dynamic_friction = uniform(0.2, 0.4);
  push.params.object_mass = uniform(0.4, 0.6);
  push.params.limit_surface_c = limit_surface_length(push.object_shape);
  push.state.object = {uniform(0.2, 0.5), uniform(0.15, 0.35),
                       uniform(-std::numbers::pi, std::numbers::pi)};
  // Random point on the rectangle perimeter and its outward normal.
  const double s = uniform(0.0, 2.0 * (w + h));
  Vec2 local, outward;
  if (s < w) {
    local = {-w / 2 + s, -h / 2};
    outward = {0, -1};
  } else if (s < w + h) {
    local = {w / 2, -h / 2 + (s - w)};
    outward = {1, 0};
  } else if (s < 2 * w + h) {
    local = {w / 2 - (s - w - h), h / 2};
    outward = {0, 1};
  } else {
    local = {-w / 2, h / 2 - (s - 2 * w - h)};
    outward = {-1, 0};
  }
  const Pose2D& obj = push.state.object;
  const double radius = std::get<Circle>(push.pusher_shape.geometry).radius;
  const Vec2 normal = rotate(outward, obj.theta);
  const double gap = u01(rng) < 0.7 ? 0.0 : uniform(0.0, 0.004);
  const Vec2 center = obj.to_world(local) + (radius + gap) * normal;
  push.state.pusher = {center.x, center.y, 0.0};
  // Mostly inward velocities, with a share of tangential and receding ones.
  const double angle = std::atan2(-normal.y, -normal.x) +
                       uniform(-0.6, 0.6) * std::numbers::pi;
  const double speed = uniform(0.01, 0.1);
  push.velocity = {std::clamp(speed * std::cos(angle), -0.1, 0.1),
                   std::clamp(speed * std::sin(angle), -0.1, 0.1)};
  return push;
}

// Brute-force advantage: sum over l of (gamma lambda)^l delta_{t+l}, cut
// at the first done.
inline std::vector<double> brute_force_gae(const std::vector<double>& r,
                                           const std::vector<double>& v,
                                           const std::vector<std::uint8_t>& d,
                                           double bootstrap, double gamma,
                                           double lambda) {
  const std::size_t n = r.size();
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      const double next = k + 1 < n ? v[k + 1] : bootstrap;
      const double delta = r[k] + (d[k] ? 0.0 : gamma * next) - v[k];
      adv[t] += weight * delta;
      if (d[k]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

}  // namespace pushgrid::oracle

#endif  // PUSHGRID_TESTS_ORACLES_HPP_
