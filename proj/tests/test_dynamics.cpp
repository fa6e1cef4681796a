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

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pushgrid/dynamics.hpp"
#include "pushgrid/error.hpp"

namespace pushgrid {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSide = 0.06;
constexpr double kRadius = 0.01;

const ShapeSpec kSquare = ShapeSpec::rectangle(kSide, kSide);
const ShapeSpec kPusher = ShapeSpec::circle(kRadius);

DynamicsParams square_params(double mu = 0.6) {
  DynamicsParams p;
  p.static_friction = mu;
  p.limit_surface_c = limit_surface_length(kSquare);
  return p;
}

TEST_CASE("limit surface length matches closed forms") {
  // Mean center distance over a square of side s and a disk of radius r.
  const double square = kSide * (std::sqrt(2.0) + std::log1p(std::sqrt(2.0))) / 6;
  CHECK(limit_surface_length(kSquare) == doctest::Approx(square).epsilon(1e-3));
  CHECK(limit_surface_length(ShapeSpec::circle(0.03)) ==
        doctest::Approx(0.02).epsilon(1e-3));
  // Linear in scale.
  CHECK(limit_surface_length(ShapeSpec::rectangle(kSide, kSide, 2.0)) ==
        doctest::Approx(2 * square).epsilon(1e-3));
}

TEST_CASE("find_contact examples") {
  const PlacedShape object{kSquare, {0, 0, 0}};
  SUBCASE("pusher 0.1 m away") {
    const PlacedShape pusher{kPusher, {-kSide / 2 - kRadius - 0.1, 0, 0}};
    CHECK_FALSE(find_contact(pusher, object).has_value());
  }
  SUBCASE("touching the middle of the left edge") {
    const PlacedShape pusher{kPusher, {-kSide / 2 - kRadius, 0, 0}};
    const auto c = find_contact(pusher, object);
    REQUIRE(c.has_value());
    CHECK(c->normal.x == doctest::Approx(1.0));
    CHECK(c->normal.y == doctest::Approx(0.0));
    CHECK(c->point.x == doctest::Approx(-kSide / 2));
    CHECK(std::abs(c->gap) < 1e-12);
  }
  SUBCASE("pusher at a corner: normal along the bisector") {
    const double d = kRadius / std::sqrt(2.0);
    const PlacedShape pusher{kPusher, {-kSide / 2 - d, -kSide / 2 - d, 0}};
    const auto c = find_contact(pusher, object);
    REQUIRE(c.has_value());
    // Oracle: closest of 40000 boundary samples.
    Vec2 best;
    double best_d = 1e9;
    const auto poly = oracle::world_polygons(kSquare, object.pose).front();
    for (std::size_t e = 0; e < 4; ++e) {
      for (int k = 0; k <= 10000; ++k) {
        const Vec2 p = poly[e] + (k / 10000.0) * (poly[(e + 1) % 4] - poly[e]);
        const double dist = norm(p - pusher.pose.position());
        if (dist < best_d) {
          best_d = dist;
          best = p;
        }
      }
    }
    const Vec2 expected =
        (1.0 / best_d) * (best - pusher.pose.position());
    CHECK(c->normal.x == doctest::Approx(expected.x).epsilon(1e-9));
    CHECK(c->normal.y == doctest::Approx(expected.y).epsilon(1e-9));
    CHECK(c->normal.x == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(c->normal.y == doctest::Approx(1 / std::sqrt(2.0)));
  }
  SUBCASE("within the contact epsilon") {
    const PlacedShape pusher{kPusher, {-kSide / 2 - kRadius - 5e-5, 0, 0}};
    CHECK(find_contact(pusher, object).has_value());
    const PlacedShape away{kPusher, {-kSide / 2 - kRadius - 2e-4, 0, 0}};
    CHECK_FALSE(find_contact(away, object).has_value());
  }
  SUBCASE("normals are unit length") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
      const auto push = oracle::random_push(rng);
      const auto c = find_contact({push.pusher_shape, push.state.pusher},
                                  {push.object_shape, push.state.object});
      if (c) CHECK(std::abs(norm(c->normal) - 1.0) < 1e-9);
    }
  }
  SUBCASE("non-circular pusher is rejected") {
    CHECK_THROWS_AS(find_contact({kSquare, {-1, 0, 0}}, object), InvalidInput);
  }
}

TEST_CASE("classify_mode examples") {
  const DynamicsParams params = square_params(0.6);
  const Pose2D pose{0, 0, 0};
  const Contact left{{-kSide / 2, 0}, {1, 0}, 0.0};
  CHECK(classify_mode(left, {0.05, 0}, params, pose) == ContactMode::kSticking);
  CHECK(classify_mode(left, {-0.05, 0}, params, pose) ==
        ContactMode::kSeparation);
  CHECK(classify_mode(left, {0.0, 0.05}, params, pose) ==
        ContactMode::kSeparation);

  // Motion-cone edge for the left-edge midpoint: A (n + mu t) with
  // A = diag(1, 1 + a^2 / c^2).
  const double a = kSide / 2, c = params.limit_surface_c;
  const double edge_angle = std::atan(0.6 * (1 + a * a / (c * c)));
  CHECK(edge_angle < 80.0 * kPi / 180.0);
  const double at80 = 80.0 * kPi / 180.0;
  const Vec2 v80{0.05 * std::cos(at80), 0.05 * std::sin(at80)};
  CHECK(classify_mode(left, v80, params, pose) == ContactMode::kSlidingPos);
  CHECK(classify_mode(left, {v80.x, -v80.y}, params, pose) ==
        ContactMode::kSlidingNeg);
  // Just inside and outside the motion cone.
  const auto at = [](double angle) {
    return Vec2{0.05 * std::cos(angle), 0.05 * std::sin(angle)};
  };
  CHECK(classify_mode(left, at(edge_angle - 1e-6), params, pose) ==
        ContactMode::kSticking);
  CHECK(classify_mode(left, at(edge_angle + 1e-6), params, pose) ==
        ContactMode::kSlidingPos);
}

TEST_CASE("limit_surface_twist examples") {
  const DynamicsParams params = square_params();
  const Pose2D pose{0.2, 0.1, 0.4};
  const Twist2D centered =
      limit_surface_twist({1.0, 0.5}, pose.position(), params, pose);
  CHECK(centered.omega == 0.0);
  CHECK(centered.vx > 0.0);
  const Twist2D zero =
      limit_surface_twist({0.0, 0.0}, {0.3, 0.3}, params, pose);
  CHECK(zero.vx == 0.0);
  CHECK(zero.vy == 0.0);
  CHECK(zero.omega == 0.0);
  // Unit +x force 0.05 m above the centroid: torque -0.05, clockwise.
  const Twist2D above = limit_surface_twist(
      {1.0, 0.0}, pose.position() + Vec2{0, 0.05}, params, pose);
  CHECK(above.omega < 0.0);
  const Twist2D below = limit_surface_twist(
      {1.0, 0.0}, pose.position() + Vec2{0, -0.05}, params, pose);
  CHECK(below.omega > 0.0);
  // Analytic gradient: 2 tau / tau_max^2.
  const double tau_max = params.max_friction_torque();
  CHECK(below.omega == doctest::Approx(2 * 0.05 / (tau_max * tau_max)));
}

TEST_CASE("step: no contact leaves the object in place") {
  const DynamicsParams params = square_params();
  const PushState start{{-0.2, 0.0, 0.0}, {0.0, 0.0, 0.3}};
  const PushState next =
      step(start, kPusher, kSquare, params, {0.1, -0.05}, 0.1);
  CHECK(next.object == start.object);
  CHECK(next.pusher.x == doctest::Approx(-0.19));
  CHECK(next.pusher.y == doctest::Approx(-0.005));
}

TEST_CASE("step: centered sticking push translates the object") {
  const DynamicsParams params = square_params();
  PushState state{{-kSide / 2 - kRadius, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  for (int i = 0; i < 10; ++i) {
    StepTrace trace;
    state = step(state, kPusher, kSquare, params, {0.05, 0.0}, 0.1,
                 kDefaultSubsteps, &trace);
    CHECK(trace.last_mode == ContactMode::kSticking);
  }
  CHECK(std::abs(state.object.x - 0.05) < 1e-3);
  CHECK(std::abs(state.object.y) < 1e-9);
  CHECK(std::abs(state.object.theta) < 1e-3);
}

TEST_CASE("step: off-center push rotates like the fine reference") {
  const DynamicsParams params = square_params();
  const PushState start{{-kSide / 2 - kRadius, 0.02, 0.0}, {0.0, 0.0, 0.0}};
  PushState coarse = start, fine = start;
  for (int i = 0; i < 5; ++i) {
    coarse = step(coarse, kPusher, kSquare, params, {0.05, 0.0}, 0.1);
    fine = step(fine, kPusher, kSquare, params, {0.05, 0.0}, 0.1, 2000);
  }
  // Pushing +x above the centroid turns the object clockwise.
  CHECK(coarse.object.theta < -1e-3);
  CHECK(std::signbit(coarse.object.theta) == std::signbit(fine.object.theta));
  CHECK(std::abs(coarse.object.theta - fine.object.theta) < 1e-2);
}

TEST_CASE("step errors") {
  const DynamicsParams params = square_params();
  const PushState start{{-0.2, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(step(start, kPusher, kSquare, params, {0.2, 0.0}, 0.1),
                  InvalidInput);
  CHECK_THROWS_AS(
      step({{std::nan(""), 0, 0}, {0, 0, 0}}, kPusher, kSquare, params,
           {0.0, 0.0}, 0.1),
      SimulationFault);
}

TEST_CASE("dynamics invariants on random pushes") {
  std::mt19937_64 rng(77);
  int sticking = 0, sliding = 0;
  for (int i = 0; i < 300; ++i) {
    const auto push = oracle::random_push(rng);
    const PlacedShape pusher{push.pusher_shape, push.state.pusher};
    const PlacedShape object{push.object_shape, push.state.object};
    if (const auto c = find_contact(pusher, object)) {
      const auto sol =
          solve_contact(*c, push.velocity, push.params, push.state.object);
      const Vec2 t = perp(c->normal);
      if (sol.mode == ContactMode::kSticking) {
        ++sticking;
        CHECK(norm(sol.contact_velocity - push.velocity) < 1e-6);
      } else if (sol.mode != ContactMode::kSeparation) {
        ++sliding;
        const double fn = dot(sol.force, c->normal);
        const double ft = std::abs(dot(sol.force, t));
        CHECK(std::abs(ft - push.params.static_friction * fn) <=
              1e-6 * push.params.static_friction * fn);
        CHECK(dot(sol.contact_velocity, c->normal) ==
              doctest::Approx(dot(push.velocity, c->normal)));
      }
    }
    const PushState a = step(push.state, push.pusher_shape, push.object_shape,
                             push.params, push.velocity, 0.1);
    const PushState b = step(push.state, push.pusher_shape, push.object_shape,
                             push.params, push.velocity, 0.1);
    CHECK(a.object == b.object);
    CHECK(a.pusher == b.pusher);
    const double gap = distance(footprint(push.pusher_shape, a.pusher),
                                footprint(push.object_shape, a.object));
    CHECK(gap >= -1e-4);
    const PushState fine = step(push.state, push.pusher_shape,
                                push.object_shape, push.params,
                                push.velocity, 0.1, 200);
    CHECK(norm(a.object.position() - fine.object.position()) < 1e-3);
    CHECK(std::abs(wrap_angle(a.object.theta - fine.object.theta)) < 1e-2);
  }
  CHECK(sticking > 20);
  CHECK(sliding > 20);
}

}  // namespace
}  // namespace pushgrid
