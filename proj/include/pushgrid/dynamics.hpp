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

#ifndef PUSHGRID_DYNAMICS_HPP_
#define PUSHGRID_DYNAMICS_HPP_

#include <optional>

#include "pushgrid/geometry.hpp"

namespace pushgrid {

inline constexpr double kGravity = 9.81;
// Pusher-object gap at or below which the two are considered in contact.
inline constexpr double kContactEpsilon = 1e-4;
inline constexpr int kDefaultSubsteps = 20;
inline constexpr double kMaxPusherSpeed = 0.1;  // per axis, m/s

struct DynamicsParams {
  double static_friction = 0.6;   // pusher-object Coulomb coefficient
  double dynamic_friction = 0.3;  // object-surface coefficient
  double restitution = 0.5;       // drawn and stored; inert when quasi-static
  double object_mass = 0.5;       // kg
  double gravity = kGravity;
  // Torque-to-force characteristic length of the object footprint.
  double limit_surface_c = 0.02;

  double max_friction_force() const {
    return dynamic_friction * object_mass * gravity;
  }
  double max_friction_torque() const {
    return max_friction_force() * limit_surface_c;
  }
};

// World-frame velocity of the object centroid and angular rate.
struct Twist2D {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
};

enum class ContactMode { kSeparation, kSticking, kSlidingPos, kSlidingNeg };

const char* to_string(ContactMode mode);

struct Contact {
  Vec2 point;   // closest point on the object boundary, world frame
  Vec2 normal;  // unit, pointing into the object
  double gap = 0.0;  // signed pusher-object distance
  ContactMode mode = ContactMode::kSeparation;
};

// Mean distance from the body origin to the points of the footprint,
// integrated on a dense sample lattice.
double limit_surface_length(const ShapeSpec& object);

// Contact between a circular pusher and a circle or convex-polygon object,
// or nullopt when the gap exceeds kContactEpsilon.
std::optional<Contact> find_contact(const PlacedShape& pusher,
                                    const PlacedShape& object);

// Gradient of the ellipsoidal limit surface at the wrench produced by
// `force` applied at `point`. Zero force gives a zero twist.
Twist2D limit_surface_twist(Vec2 force, Vec2 point,
                            const DynamicsParams& params,
                            const Pose2D& object_pose);

struct ContactSolution {
  ContactMode mode = ContactMode::kSeparation;
  Vec2 force;  // contact force on the object, scaled onto the limit surface
  Twist2D twist;
  Vec2 contact_velocity;  // object material velocity at the contact point
};

// Quasi-static contact resolution for a pusher moving at `pusher_velocity`.
// Sticking keeps the contact point glued to the pusher; sliding puts the
// force on the friction-cone edge and matches only the normal velocity.
ContactSolution solve_contact(const Contact& contact, Vec2 pusher_velocity,
                              const DynamicsParams& params,
                              const Pose2D& object_pose);

ContactMode classify_mode(const Contact& contact, Vec2 pusher_velocity,
                          const DynamicsParams& params,
                          const Pose2D& object_pose);

struct PushState {
  Pose2D pusher;
  Pose2D object;
};

// Per-step record of what the integrator saw.
struct StepTrace {
  bool touched = false;  // contact in at least one substep
  ContactMode last_mode = ContactMode::kSeparation;
};

// Integrates one control interval with `substeps` explicit substeps: resolve
// the contact, move the object by its twist, move the pusher kinematically,
// then translate the object out of any residual penetration.
// Throws SimulationFault on a non-finite state, InvalidInput when a velocity
// component exceeds kMaxPusherSpeed.
PushState step(const PushState& state, const ShapeSpec& pusher_shape,
               const ShapeSpec& object_shape, const DynamicsParams& params,
               Vec2 pusher_velocity, double dt,
               int substeps = kDefaultSubsteps, StepTrace* trace = nullptr);

}  // namespace pushgrid

#endif  // PUSHGRID_DYNAMICS_HPP_
