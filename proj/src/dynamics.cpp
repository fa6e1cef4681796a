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

#include "pushgrid/dynamics.hpp"

#include <cmath>
#include <string>

#include "pushgrid/error.hpp"

namespace pushgrid {
namespace {

constexpr int kLatticeSize = 256;

Vec2 contact_point_velocity(const Twist2D& twist, Vec2 lever) {
  return Vec2{twist.vx, twist.vy} + twist.omega * perp(lever);
}

Twist2D scaled(const Twist2D& t, double s) {
  return {s * t.vx, s * t.vy, s * t.omega};
}

void check_finite(const PushState& state) {
  if (!state.pusher.finite() || !state.object.finite()) {
    throw SimulationFault("non-finite pusher or object pose");
  }
}

}  // namespace

const char* to_string(ContactMode mode) {
  switch (mode) {
    case ContactMode::kSeparation:
      return "separation";
    case ContactMode::kSticking:
      return "sticking";
    case ContactMode::kSlidingPos:
      return "sliding_pos";
    case ContactMode::kSlidingNeg:
      return "sliding_neg";
  }
  return "unknown";
}

double limit_surface_length(const ShapeSpec& object) {
  const Footprint shape = footprint(object, {});
  const Aabb box = shape.bounds();
  const double dx = (box.max.x - box.min.x) / kLatticeSize;
  const double dy = (box.max.y - box.min.y) / kLatticeSize;
  double sum = 0.0;
  long count = 0;
  for (int i = 0; i < kLatticeSize; ++i) {
    for (int j = 0; j < kLatticeSize; ++j) {
      const Vec2 p{box.min.x + (i + 0.5) * dx, box.min.y + (j + 0.5) * dy};
      if (contains(shape, p)) {
        sum += norm(p);
        ++count;
      }
    }
  }
  if (count == 0) throw InvalidInput("object footprint has no area");
  return sum / static_cast<double>(count);
}

std::optional<Contact> find_contact(const PlacedShape& pusher,
                                    const PlacedShape& object) {
  const auto* tip = std::get_if<Circle>(&pusher.shape.geometry);
  if (tip == nullptr) throw InvalidInput("pusher must be a circle");
  const Vec2 center = pusher.pose.position();
  const double radius = pusher.shape.scale * tip->radius;

  Contact contact;
  if (const auto* disk = std::get_if<Circle>(&object.shape.geometry)) {
    const Vec2 to_object = object.pose.position() - center;
    const double dist = norm(to_object);
    const double object_radius = object.shape.scale * disk->radius;
    contact.gap = dist - object_radius - radius;
    if (contact.gap > kContactEpsilon) return std::nullopt;
    contact.normal = dist > 0.0 ? (1.0 / dist) * to_object : Vec2{1.0, 0.0};
    contact.point = object.pose.position() - object_radius * contact.normal;
    return contact;
  }
  if (std::holds_alternative<Composite>(object.shape.geometry)) {
    throw InvalidInput("pushed object must be a circle or convex polygon");
  }
  const Footprint body = footprint(object);
  const auto& polygon = std::get<WorldPolygon>(body.parts.front());
  const BoundaryPoint closest = closest_boundary_point(polygon, center);
  contact.gap = closest.signed_distance - radius;
  if (contact.gap > kContactEpsilon) return std::nullopt;
  contact.point = closest.point;
  const Vec2 d = closest.point - center;
  const double len = norm(d);
  if (len > 1e-12) {
    contact.normal = (closest.signed_distance >= 0.0 ? 1.0 : -1.0) / len * d;
  } else {
    // Pusher center exactly on the boundary: fall back to the centroid ray.
    const Vec2 inward = object.pose.position() - center;
    contact.normal = (1.0 / norm(inward)) * inward;
  }
  return contact;
}

Twist2D limit_surface_twist(Vec2 force, Vec2 point,
                            const DynamicsParams& params,
                            const Pose2D& object_pose) {
  const double torque = cross(point - object_pose.position(), force);
  const double f_max = params.max_friction_force();
  const double tau_max = params.max_friction_torque();
  return {2.0 * force.x / (f_max * f_max), 2.0 * force.y / (f_max * f_max),
          2.0 * torque / (tau_max * tau_max)};
}

ContactSolution solve_contact(const Contact& contact, Vec2 pusher_velocity,
                              const DynamicsParams& params,
                              const Pose2D& object_pose) {
  ContactSolution out;
  const Vec2 n = contact.normal;
  const double normal_speed = dot(pusher_velocity, n);
  if (normal_speed <= 0.0) return out;

  const Vec2 lever = contact.point - object_pose.position();
  const Vec2 arm = perp(lever);
  const double c2 = params.limit_surface_c * params.limit_surface_c;
  // The contact-point velocity is A f with A = I + arm arm^T / c^2;
  // Sherman-Morrison gives the force that reproduces the pusher velocity.
  const Vec2 stick_force =
      pusher_velocity -
      (dot(arm, pusher_velocity) / (c2 + dot(arm, arm))) * arm;
  const Vec2 t = perp(n);
  const double mu = params.static_friction;
  const double fn = dot(stick_force, n);
  const double ft = dot(stick_force, t);

  Vec2 direction;
  if (fn > 0.0 && std::abs(ft) <= mu * fn) {
    out.mode = ContactMode::kSticking;
    direction = stick_force;
  } else {
    const double side = ft >= 0.0 ? 1.0 : -1.0;
    out.mode = side > 0.0 ? ContactMode::kSlidingPos : ContactMode::kSlidingNeg;
    direction = n + (side * mu) * t;
  }

  const Twist2D unit =
      limit_surface_twist(direction, contact.point, params, object_pose);
  const Vec2 unit_velocity = contact_point_velocity(unit, lever);
  const double unit_normal = dot(unit_velocity, n);
  if (!(unit_normal > 1e-12 * norm(unit_velocity))) {
    // Degenerate lever geometry: the pushed point cannot recede.
    return ContactSolution{};
  }
  const double lambda = normal_speed / unit_normal;
  out.twist = scaled(unit, lambda);
  out.contact_velocity = lambda * unit_velocity;

  const double f_max = params.max_friction_force();
  const double tau = cross(lever, direction) / params.max_friction_torque();
  const double level = dot(direction, direction) / (f_max * f_max) + tau * tau;
  out.force = (1.0 / std::sqrt(level)) * direction;
  return out;
}

ContactMode classify_mode(const Contact& contact, Vec2 pusher_velocity,
                          const DynamicsParams& params,
                          const Pose2D& object_pose) {
  return solve_contact(contact, pusher_velocity, params, object_pose).mode;
}

PushState step(const PushState& state, const ShapeSpec& pusher_shape,
               const ShapeSpec& object_shape, const DynamicsParams& params,
               Vec2 pusher_velocity, double dt, int substeps,
               StepTrace* trace) {
  check_finite(state);
  if (!std::isfinite(pusher_velocity.x) || !std::isfinite(pusher_velocity.y)) {
    throw SimulationFault("non-finite pusher velocity");
  }
  constexpr double kSlack = 1e-12;
  if (std::abs(pusher_velocity.x) > kMaxPusherSpeed + kSlack ||
      std::abs(pusher_velocity.y) > kMaxPusherSpeed + kSlack) {
    throw InvalidInput("pusher velocity outside [-0.1, 0.1] m/s");
  }
  if (substeps < 1 || !(dt > 0.0)) {
    throw InvalidInput("step needs dt > 0 and at least one substep");
  }

  const double h = dt / substeps;
  PlacedShape pusher{pusher_shape, state.pusher};
  PlacedShape object{object_shape, state.object};
  StepTrace local;
  for (int i = 0; i < substeps; ++i) {
    if (const auto contact = find_contact(pusher, object)) {
      const ContactSolution sol =
          solve_contact(*contact, pusher_velocity, params, object.pose);
      local.touched = true;
      local.last_mode = sol.mode;
      if (sol.mode != ContactMode::kSeparation) {
        object.pose.x += h * sol.twist.vx;
        object.pose.y += h * sol.twist.vy;
        object.pose.theta = wrap_angle(object.pose.theta + h * sol.twist.omega);
      }
    }
    pusher.pose.x += h * pusher_velocity.x;
    pusher.pose.y += h * pusher_velocity.y;
    if (const auto contact = find_contact(pusher, object)) {
      local.touched = true;
      if (contact->gap < 0.0) {
        object.pose.x -= contact->gap * contact->normal.x;
        object.pose.y -= contact->gap * contact->normal.y;
      }
    }
  }
  PushState next{pusher.pose, object.pose};
  check_finite(next);
  if (trace != nullptr) *trace = local;
  return next;
}

}  // namespace pushgrid
