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

#include "pushgrid/env.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pushgrid/error.hpp"
#include "pushgrid/obstacle_motion.hpp"
#include "pushgrid/scene_io.hpp"

namespace pushgrid {
namespace {

constexpr int kMaxRejections = 1000;
constexpr int kPusherTries = 20;
constexpr double kPi = std::numbers::pi;

Pose2D uniform_pose(Rng& rng, const Workspace& ws) {
  return {uniform(rng, ws.origin.x, ws.x_max()),
          uniform(rng, ws.origin.y, ws.y_max()),
          wrap_angle(uniform(rng, -kPi, kPi))};
}

bool collides_any(const Footprint& shape, const std::vector<Footprint>& others) {
  for (const Footprint& o : others) {
    if (collide(shape, o)) return true;
  }
  return false;
}

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kNone:
      return "none";
    case Termination::kSuccess:
      return "success";
    case Termination::kCollision:
      return "collision";
    case Termination::kTimeout:
      return "timeout";
    case Termination::kBoundary:
      return "boundary";
  }
  return "unknown";
}

std::vector<PlacedShape> SceneState::obstacle_bodies() const {
  std::vector<PlacedShape> bodies;
  bodies.reserve(obstacles.size());
  for (const Obstacle& o : obstacles) bodies.push_back(o.body);
  return bodies;
}

Vec2 decode_action(const Action& action) {
  if (action.bin_x < 0 || action.bin_x >= kActionBins || action.bin_y < 0 ||
      action.bin_y >= kActionBins) {
    throw InvalidAction("action bins must lie in [0, 10], got (" +
                        std::to_string(action.bin_x) + ", " +
                        std::to_string(action.bin_y) + ")");
  }
  return {-kMaxPusherSpeed + kVelocityStep * action.bin_x,
          -kMaxPusherSpeed + kVelocityStep * action.bin_y};
}

double position_error(const SceneState& state) {
  return norm(state.object_pose.position() - state.target_pose.position());
}

double angle_error(const SceneState& state) {
  return std::abs(wrap_angle(state.object_pose.theta - state.target_pose.theta));
}

RewardTerms reward_terms(const SceneState& state) {
  return {std::min(1.0, position_error(state) / state.workspace.diagonal()),
          std::min(1.0, angle_error(state) / kPi)};
}

bool in_collision(const SceneState& state) {
  const Footprint pusher = footprint(state.pusher_shape, state.pusher_pose);
  const Footprint object = footprint(state.object_shape, state.object_pose);
  for (const Obstacle& o : state.obstacles) {
    const Footprint body = footprint(o.body);
    if (collide(pusher, body) || collide(object, body)) return true;
  }
  return false;
}

double compute_reward(const SceneState& after, Termination terminal,
                      bool collision) {
  const RewardTerms terms = reward_terms(after);
  double terminal_reward = 0.0;
  if (terminal == Termination::kSuccess) terminal_reward = kSuccessReward;
  if (terminal == Termination::kBoundary) terminal_reward = kBoundaryReward;
  return terminal_reward + kDistanceWeight * (1.0 - terms.distance) +
         kAngleWeight * (1.0 - terms.angle) +
         (collision ? kCollisionPenalty : 0.0);
}

double compute_reward(const SceneState& after, Termination terminal) {
  return compute_reward(after, terminal, in_collision(after));
}

PushEnv::PushEnv(ScenarioSpec scenario) : scenario_(std::move(scenario)) {
  scenario_.validate();
  noise_.enabled = scenario_.noise;
  unit_limit_surface_ =
      limit_surface_length(ShapeSpec::rectangle(scenario_.object_size,
                                                scenario_.object_size));
}

void PushEnv::sample_episode(Rng& rng) {
  const Workspace ws = scenario_.workspace();
  SceneState s;
  s.workspace = ws;
  const bool r = scenario_.randomize;
  s.params.static_friction = r ? uniform(rng, 0.5, 0.7) : 0.6;
  s.params.dynamic_friction = r ? uniform(rng, 0.2, 0.4) : 0.3;
  s.params.restitution = r ? uniform(rng, 0.4, 0.6) : 0.5;
  s.params.object_mass = r ? uniform(rng, 0.4, 0.6) : 0.5;
  const double object_scale = r ? uniform(rng, 0.9, 1.1) : 1.0;
  const double pusher_scale = r ? uniform(rng, 0.95, 1.05) : 1.0;
  s.object_shape = ShapeSpec::rectangle(scenario_.object_size,
                                        scenario_.object_size, object_scale);
  s.pusher_shape = ShapeSpec::circle(scenario_.pusher_radius, pusher_scale);
  s.params.limit_surface_c = unit_limit_surface_ * object_scale;

  std::vector<ShapeSpec> obstacle_shapes;
  for (const ObstacleGroup& g : scenario_.obstacles) {
    for (int i = 0; i < g.count; ++i) {
      const double scale = r ? uniform(rng, g.scale_min, g.scale_max)
                             : 0.5 * (g.scale_min + g.scale_max);
      obstacle_shapes.push_back(obstacle_shape(g.kind, scale));
    }
  }

  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    s.object_pose = uniform_pose(rng, ws);
    s.target_pose = uniform_pose(rng, ws);
    const Footprint object = footprint(s.object_shape, s.object_pose);
    const Footprint target = footprint(s.object_shape, s.target_pose);
    if (!in_workspace(object, ws) || !in_workspace(target, ws)) continue;
    if (position_error(s) < kSuccessPositionTolerance) continue;

    // Obstacles sit in a corridor around the object->target segment,
    // strictly between the two along it.
    const Vec2 from = s.object_pose.position();
    const Vec2 axis = s.target_pose.position() - from;
    const Vec2 side = (1.0 / norm(axis)) * perp(axis);
    std::vector<Footprint> placed;
    s.obstacles.clear();
    bool ok = true;
    for (const ShapeSpec& shape : obstacle_shapes) {
      const double t = uniform(rng, 0.0, 1.0);
      const double lateral = uniform(rng, -scenario_.corridor_half_width,
                                     scenario_.corridor_half_width);
      const Vec2 c = from + t * axis + lateral * side;
      Obstacle o{{shape, {c.x, c.y, wrap_angle(uniform(rng, -kPi, kPi))}}, {}};
      const Footprint f = footprint(o.body);
      if (t <= 0.0 || !in_workspace(f, ws) || collide(f, object) ||
          collide(f, target) || collides_any(f, placed)) {
        ok = false;
        break;
      }
      if (scenario_.dynamic) {
        o.velocity = {0.0, (rng() & 1) ? scenario_.obstacle_speed
                                       : -scenario_.obstacle_speed};
      }
      placed.push_back(f);
      s.obstacles.push_back(std::move(o));
    }
    if (!ok) continue;

    placed.push_back(object);
    for (int k = 0; k < kPusherTries; ++k) {
      const Pose2D p = uniform_pose(rng, ws);
      s.pusher_pose = {p.x, p.y, 0.0};
      const Footprint pusher = footprint(s.pusher_shape, s.pusher_pose);
      if (in_workspace(pusher, ws) && !collides_any(pusher, placed)) {
        state_ = std::move(s);
        return;
      }
    }
  }
  throw ScenarioInfeasible("scenario '" + scenario_.name +
                           "': no feasible layout after " +
                           std::to_string(kMaxRejections) + " samples");
}

void PushEnv::rebuild_grid() {
  const OccupancyGrid grid = rasterize(state_.obstacle_bodies(),
                                       state_.workspace, scenario_.resolution);
  patches_ = std::make_shared<const PatchSet>(decompose_patches(grid));
  grid_ = std::make_shared<const OccupancyGrid>(grid);
}

Observation PushEnv::observe() {
  Observation obs;
  obs.object_pose = state_.object_pose;
  obs.target_pose = state_.target_pose;
  obs.pusher_pos = state_.pusher_pose.position();
  obs.grid = grid_;
  obs.patches = patches_;
  if (noise_.enabled) {
    const double ps = noise_.position_sigma, as = noise_.angle_sigma;
    obs.object_pose.x += offsets_[0] + gaussian(noise_rng_, ps);
    obs.object_pose.y += offsets_[1] + gaussian(noise_rng_, ps);
    obs.object_pose.theta = wrap_angle(obs.object_pose.theta + offsets_[2] +
                                       gaussian(noise_rng_, as));
    obs.pusher_pos.x += offsets_[3] + gaussian(noise_rng_, ps);
    obs.pusher_pos.y += offsets_[4] + gaussian(noise_rng_, ps);
  }
  return obs;
}

Observation PushEnv::reset(std::uint64_t seed) {
  Rng rng = make_rng(seed, "scenario");
  sample_episode(rng);
  return restore(state_, derive_seed(seed, "noise"));
}

Observation PushEnv::restore(const SceneState& state,
                             std::uint64_t noise_seed) {
  if (&state != &state_) state_ = state;
  noise_rng_ = Rng(noise_seed);
  offsets_ = {};
  if (noise_.enabled) {
    offsets_ = {gaussian(noise_rng_, noise_.position_sigma),
                gaussian(noise_rng_, noise_.position_sigma),
                gaussian(noise_rng_, noise_.angle_sigma),
                gaussian(noise_rng_, noise_.position_sigma),
                gaussian(noise_rng_, noise_.position_sigma)};
  }
  rebuild_grid();
  done_ = false;
  return observe();
}

StepResult PushEnv::step(const Action& action) {
  if (done_) throw ProtocolError("step called on a finished or unreset episode");
  const Vec2 velocity = decode_action(action);
  const PushState next =
      pushgrid::step({state_.pusher_pose, state_.object_pose},
                     state_.pusher_shape, state_.object_shape, state_.params,
                     velocity, kControlPeriod);
  state_.pusher_pose = next.pusher;
  state_.object_pose = next.object;
  if (scenario_.dynamic) {
    for (Obstacle& o : state_.obstacles) {
      o = dynamic_obstacle_update(o, kControlPeriod, state_.workspace);
    }
    rebuild_grid();
  }
  ++state_.step_count;

  StepResult result;
  result.info.collision = in_collision(state_);
  const bool inside =
      in_workspace(state_.object_shape, state_.object_pose, state_.workspace) &&
      in_workspace(state_.pusher_shape, state_.pusher_pose, state_.workspace);
  const bool reached =
      position_error(state_) < kSuccessPositionTolerance &&
      (!scenario_.orientation_in_success ||
       angle_error(state_) < kSuccessAngleTolerance);
  Termination t = Termination::kNone;
  if (scenario_.terminate_on_collision && result.info.collision) {
    t = Termination::kCollision;
  } else if (!inside) {
    t = Termination::kBoundary;
  } else if (reached) {
    t = Termination::kSuccess;
  } else if (state_.step_count >= scenario_.max_steps) {
    t = Termination::kTimeout;
  }
  result.termination = t;
  result.done = t != Termination::kNone;
  result.info.success = t == Termination::kSuccess;
  result.info.boundary = t == Termination::kBoundary;
  result.info.timeout = t == Termination::kTimeout;
  result.reward = compute_reward(state_, t, result.info.collision);
  done_ = result.done;
  result.observation = observe();
  return result;
}

nlohmann::json PushEnv::snapshot() const {
  return {{"state", state_},
          {"noise_rng", serialize_rng(noise_rng_)},
          {"offsets", offsets_},
          {"done", done_}};
}

void PushEnv::load_snapshot(const nlohmann::json& j) {
  state_ = j.at("state").get<SceneState>();
  noise_rng_ = deserialize_rng(j.at("noise_rng").get<std::string>());
  offsets_ = j.at("offsets").get<std::array<double, 5>>();
  done_ = j.at("done").get<bool>();
  rebuild_grid();
}

VectorEnv::VectorEnv(const ScenarioSpec& scenario, int num_envs,
                     std::uint64_t seed, int workers)
    : seed_(seed),
      episodes_(static_cast<std::size_t>(std::max(0, num_envs)), 0),
      pool_(std::make_unique<WorkerPool>(workers)) {
  if (num_envs < 1) throw BatchError("need at least one environment");
  envs_.reserve(num_envs);
  for (int i = 0; i < num_envs; ++i) envs_.emplace_back(scenario);
  current_.resize(num_envs);
}

std::uint64_t VectorEnv::next_seed(int env) {
  return derive_seed(seed_, "env",
                     (static_cast<std::uint64_t>(env) << 32) | episodes_[env]++);
}

std::vector<Observation> VectorEnv::reset_all() {
  pool_->run(size(), [&](int i) { current_[i] = envs_[i].reset(next_seed(i)); });
  return current_;
}

VectorEnv::Batch VectorEnv::step(std::span<const Action> actions) {
  if (static_cast<int>(actions.size()) != size()) {
    throw BatchError("expected " + std::to_string(size()) + " actions, got " +
                     std::to_string(actions.size()));
  }
  Batch batch;
  batch.results.resize(size());
  batch.next.resize(size());
  pool_->run(size(), [&](int i) {
    batch.results[i] = envs_[i].step(actions[i]);
    batch.next[i] = batch.results[i].done ? envs_[i].reset(next_seed(i))
                                          : batch.results[i].observation;
    current_[i] = batch.next[i];
  });
  return batch;
}

namespace {

nlohmann::json observation_poses(const Observation& o) {
  return {{"object", o.object_pose}, {"target", o.target_pose},
          {"pusher", o.pusher_pos}};
}

}  // namespace

nlohmann::json VectorEnv::snapshot() const {
  nlohmann::json envs = nlohmann::json::array();
  nlohmann::json current = nlohmann::json::array();
  for (int i = 0; i < size(); ++i) {
    envs.push_back(envs_[i].snapshot());
    current.push_back(observation_poses(current_[i]));
  }
  return {{"seed", seed_}, {"episodes", episodes_}, {"envs", envs},
          {"current", current}};
}

void VectorEnv::load_snapshot(const nlohmann::json& j) {
  if (j.at("envs").size() != envs_.size()) {
    throw BatchError("snapshot holds a different number of environments");
  }
  seed_ = j.at("seed").get<std::uint64_t>();
  episodes_ = j.at("episodes").get<std::vector<std::uint64_t>>();
  for (int i = 0; i < size(); ++i) {
    envs_[i].load_snapshot(j["envs"][i]);
    const auto& c = j["current"][i];
    current_[i] = Observation{c.at("object").get<Pose2D>(),
                              c.at("target").get<Pose2D>(),
                              c.at("pusher").get<Vec2>(), envs_[i].grid(),
                              nullptr};
  }
  for (int i = 0; i < size(); ++i) {
    current_[i].patches = std::make_shared<const PatchSet>(
        decompose_patches(*current_[i].grid));
  }
}

void to_json(nlohmann::json& j, const DynamicsParams& p) {
  j = {{"static_friction", p.static_friction},
       {"dynamic_friction", p.dynamic_friction},
       {"restitution", p.restitution},
       {"object_mass", p.object_mass},
       {"gravity", p.gravity},
       {"limit_surface_c", p.limit_surface_c}};
}

void from_json(const nlohmann::json& j, DynamicsParams& p) {
  p.static_friction = j.at("static_friction").get<double>();
  p.dynamic_friction = j.at("dynamic_friction").get<double>();
  p.restitution = j.at("restitution").get<double>();
  p.object_mass = j.at("object_mass").get<double>();
  p.gravity = j.at("gravity").get<double>();
  p.limit_surface_c = j.at("limit_surface_c").get<double>();
}

void to_json(nlohmann::json& j, const SceneState& s) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Obstacle& o : s.obstacles) {
    nlohmann::json entry = o.body;
    entry["velocity"] = o.velocity;
    obstacles.push_back(entry);
  }
  j = {{"workspace", s.workspace},
       {"pusher_pose", s.pusher_pose},
       {"object_pose", s.object_pose},
       {"target_pose", s.target_pose},
       {"obstacles", obstacles},
       {"pusher_shape", s.pusher_shape},
       {"object_shape", s.object_shape},
       {"params", s.params},
       {"step_count", s.step_count}};
}

void from_json(const nlohmann::json& j, SceneState& s) {
  s.workspace = j.at("workspace").get<Workspace>();
  s.pusher_pose = j.at("pusher_pose").get<Pose2D>();
  s.object_pose = j.at("object_pose").get<Pose2D>();
  s.target_pose = j.at("target_pose").get<Pose2D>();
  s.obstacles.clear();
  for (const auto& entry : j.at("obstacles")) {
    s.obstacles.push_back(
        {entry.get<PlacedShape>(), entry.value("velocity", Vec2{})});
  }
  s.pusher_shape = j.at("pusher_shape").get<ShapeSpec>();
  s.object_shape = j.at("object_shape").get<ShapeSpec>();
  s.params = j.at("params").get<DynamicsParams>();
  s.step_count = j.at("step_count").get<int>();
}

}  // namespace pushgrid
