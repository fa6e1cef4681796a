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
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "pushgrid/error.hpp"
#include "pushgrid/evalbench.hpp"
#include "pushgrid/obstacle_motion.hpp"
#include "pushgrid/ppo.hpp"

namespace pushgrid {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pushgrid_test_eval_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

Agent make_agent(const ScenarioSpec& scenario, std::uint64_t seed = 1) {
  Rng rng = make_rng(seed, "init");
  return Agent(network_spec(ExtractorKind::kAttention, scenario), rng);
}

const Controller kStill = [](const Observation&, int) { return Action{5, 5}; };

// Moves the pusher toward a fixed point at full speed per axis.
Controller seek(Vec2 goal) {
  return [goal](const Observation& obs, int) {
    const auto bin = [](double d) { return d > 0.005 ? 10 : d < -0.005 ? 0 : 5; };
    return Action{bin(goal.x - obs.pusher_pos.x), bin(goal.y - obs.pusher_pos.y)};
  };
}

TEST_CASE("a motionless controller times out after 200 steps") {
  const ScenarioSpec scenario = named_scenario("training");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const EpisodeOutcome o = run_episode(kStill, scenario, seed);
    CHECK(o.kind == Termination::kTimeout);
    CHECK(o.steps == 200);
  }
}

TEST_CASE("driving into an obstacle ends the episode at first contact") {
  ScenarioSpec scenario = named_scenario("training");
  scenario.noise = false;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PushEnv probe(scenario);
    probe.reset(seed);
    const Vec2 goal = probe.state().obstacles.front().body.pose.position();
    const Controller c = seek(goal);

    // Oracle: the same actions in an environment that ignores contact.
    ScenarioSpec free_run = scenario;
    free_run.terminate_on_collision = false;
    PushEnv oracle(free_run);
    Observation obs = oracle.reset(seed);
    int first_contact = -1;
    Termination other = Termination::kNone;
    for (int t = 0; t < 200; ++t) {
      const StepResult r = oracle.step(c(obs, t));
      if (in_collision(oracle.state())) {
        first_contact = t + 1;
        break;
      }
      if (r.done) {
        other = r.termination;
        break;
      }
      obs = r.observation;
    }

    const EpisodeOutcome o = run_episode(c, scenario, seed);
    if (first_contact > 0) {
      CHECK(o.kind == Termination::kCollision);
      CHECK(o.steps == first_contact);
      ++checked;
    } else {
      CHECK(o.kind == other);
    }
  }
  CHECK(checked >= 5);
}

TEST_CASE("episodes are reproducible for a fixed seed") {
  const ScenarioSpec scenario = named_scenario("dynamic");
  Agent agent = make_agent(scenario);
  for (bool deterministic : {true, false}) {
    const EpisodeOutcome a = run_episode(agent, scenario, 11, deterministic, true);
    const EpisodeOutcome b = run_episode(agent, scenario, 11, deterministic, true);
    CHECK(a.kind == b.kind);
    CHECK(a.steps == b.steps);
    CHECK(a.total_reward == b.total_reward);
    CHECK(format_trajectory(*a.trajectory, TrajectoryFormat::kNdjson) ==
          format_trajectory(*b.trajectory, TrajectoryFormat::kNdjson));
  }
}

TEST_CASE("outcomes respect the success thresholds") {
  // Pushing toward the target from behind the object succeeds sometimes;
  // whatever happens, a success must satisfy both tolerances.
  ScenarioSpec scenario = named_scenario("no_obstacle");
  scenario.noise = false;
  scenario.orientation_in_success = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EpisodeOutcome o = run_episode(
        [](const Observation& obs, int) {
          const Vec2 d = obs.target_pose.position() - obs.object_pose.position();
          const Vec2 behind = obs.object_pose.position() - d * (0.05 / std::max(norm(d), 1e-9));
          const Vec2 aim = norm(obs.pusher_pos - behind) > 0.01 ? behind
                                                               : obs.target_pose.position();
          const auto bin = [](double v) { return v > 0.005 ? 10 : v < -0.005 ? 0 : 5; };
          return Action{bin(aim.x - obs.pusher_pos.x), bin(aim.y - obs.pusher_pos.y)};
        },
        scenario, seed);
    CHECK(o.kind != Termination::kNone);
    if (o.kind == Termination::kSuccess) {
      CHECK(o.final_pos_error < kSuccessPositionTolerance);
      CHECK(o.final_ang_error < kSuccessAngleTolerance);
    }
  }
}

TEST_CASE("aggregate of all successes") {
  std::vector<EpisodeOutcome> outcomes(100);
  for (auto& o : outcomes) {
    o.kind = Termination::kSuccess;
    o.steps = 40;
  }
  const ScenarioMetrics m = aggregate("x", outcomes);
  CHECK(m.success_rate == 100.0);
  CHECK(m.collision_rate == 0.0);
  CHECK(m.timeout_rate == 0.0);
  CHECK(m.boundary_rate == 0.0);
  CHECK(m.success_ci == 0.0);
  CHECK(m.mean_steps_to_success == 40.0);
  CHECK(std::isnan(aggregate("y", std::vector<EpisodeOutcome>(3)).mean_steps_to_success));
}

TEST_CASE("binomial half-width") {
  CHECK(binomial_half_width(50, 100) == doctest::Approx(9.8).epsilon(1e-12));
  CHECK(binomial_half_width(0, 10) == 0.0);
  CHECK(binomial_half_width(0, 0) == 0.0);
}

TEST_CASE("suite report matches an independent recount") {
  const std::vector<ScenarioSpec> scenarios = {named_scenario("training"),
                                               named_scenario("cross")};
  Agent agent = make_agent(scenarios[0], 4);
  SuiteOptions options;
  options.episodes = 20;
  options.seed = 7;
  options.deterministic = false;
  const SuiteResult r = run_suite(agent, scenarios, options);
  REQUIRE(r.report.scenarios.size() == 2);
  for (std::size_t s = 0; s < 2; ++s) {
    int counts[5] = {};
    for (const EpisodeOutcome& o : r.outcomes[s]) {
      CHECK(o.kind != Termination::kNone);
      ++counts[static_cast<int>(o.kind)];
    }
    const ScenarioMetrics& m = r.report.scenarios[s];
    CHECK(m.scenario == scenarios[s].name);
    CHECK(m.episodes == 20);
    CHECK(m.success_rate == 100.0 * counts[int(Termination::kSuccess)] / 20);
    CHECK(m.collision_rate == 100.0 * counts[int(Termination::kCollision)] / 20);
    CHECK(m.timeout_rate == 100.0 * counts[int(Termination::kTimeout)] / 20);
    CHECK(m.boundary_rate == 100.0 * counts[int(Termination::kBoundary)] / 20);
    CHECK(m.success_rate + m.collision_rate + m.timeout_rate + m.boundary_rate ==
          doctest::Approx(100.0).epsilon(1e-12));
  }
  // Episodes are seeded independently: layouts differ across the suite.
  CHECK(r.outcomes[0][0].seed != r.outcomes[0][1].seed);
  CHECK(r.outcomes[0][0].seed != r.outcomes[1][0].seed);
}

TEST_CASE("suite results do not depend on the worker count") {
  const std::vector<ScenarioSpec> scenarios = {named_scenario("dual")};
  Agent agent = make_agent(scenarios[0], 5);
  SuiteOptions options;
  options.episodes = 2 * kEvalBlock + 3;
  options.seed = 3;
  options.deterministic = false;
  const SuiteResult a = run_suite(agent, scenarios, options);
  options.workers = 3;
  const SuiteResult b = run_suite(agent, scenarios, options);
  CHECK(a.report.to_csv() == b.report.to_csv());
  for (int e = 0; e < options.episodes; ++e) {
    CHECK(a.outcomes[0][e].total_reward == b.outcomes[0][e].total_reward);
  }
}

TEST_CASE("run_suite rejects empty input") {
  Agent agent = make_agent(named_scenario("training"));
  CHECK_THROWS_AS(run_suite(agent, {}, SuiteOptions{}), InvalidInput);
  SuiteOptions none;
  none.episodes = 0;
  CHECK_THROWS_AS(run_suite(agent, {named_scenario("training")}, none), InvalidInput);
}

TEST_CASE("report CSV and table list every scenario") {
  MetricsReport report;
  std::vector<EpisodeOutcome> o(4);
  o[0].kind = Termination::kSuccess;
  o[1].kind = Termination::kCollision;
  o[2].kind = Termination::kTimeout;
  o[3].kind = Termination::kBoundary;
  report.scenarios.push_back(aggregate("training", o));
  report.scenarios.push_back(aggregate("cross", o));
  const std::string csv = report.to_csv();
  const auto lines = split(csv, '\n');
  REQUIRE(lines.size() == 3);
  CHECK(split(lines[0], ',').size() == split(lines[1], ',').size());
  CHECK(lines[1].rfind("training,4,1,1,1,1,25.0000,", 0) == 0);
  CHECK(report.to_table().find("cross") != std::string::npos);
}

TEST_CASE("evaluation leaves the checkpoint untouched") {
  const fs::path dir = scratch("ckpt");
  TrainConfig config;
  config.num_envs = 2;
  config.rollout_length = 4;
  config.update_epochs = 1;
  config.minibatches = 1;
  Trainer trainer(config, named_scenario("training", Phase::kTraining));
  trainer.save(dir / "a.ckpt");
  const std::string before = file_bytes(dir / "a.ckpt");
  SuiteOptions options;
  options.episodes = 3;
  run_suite(dir / "a.ckpt", {named_scenario("training")}, options);
  run_episode(dir / "a.ckpt", named_scenario("cross"), 1, true);
  CHECK(file_bytes(dir / "a.ckpt") == before);
  CHECK_THROWS_AS(run_episode(dir / "missing.ckpt", named_scenario("cross"), 1, true),
                  FormatError);
}

TEST_CASE("CSV export has one row per step and is byte-stable") {
  const fs::path dir = scratch("csv");
  const EpisodeOutcome o = run_episode(kStill, named_scenario("training"), 5, true);
  REQUIRE(o.steps == 200);
  export_trajectory(o, TrajectoryFormat::kCsv, dir / "a.csv");
  export_trajectory(o, TrajectoryFormat::kCsv, dir / "b.csv");
  const std::string text = file_bytes(dir / "a.csv");
  CHECK(text == file_bytes(dir / "b.csv"));
  const auto lines = split(text, '\n');
  CHECK(lines.size() == 201);
  CHECK(lines[0].rfind("step,action_x,action_y,pusher_x,pusher_y,object_x", 0) == 0);
  CHECK(split(lines[200], ',').back() == "timeout");
}

TEST_CASE("exported rewards are reproduced by the reward function") {
  ScenarioSpec scenario = named_scenario("training");
  Agent agent = make_agent(scenario, 8);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const EpisodeOutcome o = run_episode(agent, scenario, seed, false, true);
    const std::string csv =
        format_trajectory(*o.trajectory, TrajectoryFormat::kCsv);
    const auto lines = split(csv, '\n');
    REQUIRE(lines.size() == static_cast<std::size_t>(o.steps) + 1);
    SceneState state = o.trajectory->initial;
    double total = 0.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto f = split(lines[i], ',');
      REQUIRE(f.size() == 11);
      state.pusher_pose = {std::stod(f[3]), std::stod(f[4]), 0.0};
      state.object_pose = {std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
      Termination t = Termination::kNone;
      if (f[10] == "success") t = Termination::kSuccess;
      if (f[10] == "boundary") t = Termination::kBoundary;
      if (f[10] == "collision") t = Termination::kCollision;
      if (f[10] == "timeout") t = Termination::kTimeout;
      const bool collision = in_collision(state);
      CHECK(collision == (f[9] == "1"));
      const double reward = compute_reward(state, t, collision);
      CHECK(std::abs(reward - std::stod(f[8])) <= 1e-9);
      total += reward;
    }
    CHECK(std::abs(total - o.total_reward) <= 1e-9 * o.steps);
  }
}

TEST_CASE("NDJSON export replays without divergence") {
  const fs::path dir = scratch("ndjson");
  for (const char* name : {"training", "dynamic", "l_shape"}) {
    const ScenarioSpec scenario = named_scenario(name);
    Agent agent = make_agent(scenario, 9);
    const EpisodeOutcome o = run_episode(agent, scenario, 21, false, true);
    const fs::path path = dir / (std::string(name) + ".ndjson");
    export_trajectory(o, TrajectoryFormat::kNdjson, path);
    const Trajectory t = read_trajectory(path);
    CHECK(t.points.size() == static_cast<std::size_t>(o.steps));
    CHECK(format_trajectory(t, TrajectoryFormat::kNdjson) == file_bytes(path));
    const ReplayReport r = replay_trajectory(t);
    CHECK(r.steps == o.steps);
    CHECK(r.max_position_divergence < 1e-9);
    CHECK(r.max_angle_divergence < 1e-9);
    CHECK(r.max_reward_divergence < 1e-9);
    CHECK(r.terminations_match);
  }
}

TEST_CASE("replay reports divergence of a tampered log") {
  const EpisodeOutcome o = run_episode(
      seek({0.0, 0.0}), named_scenario("no_obstacle"), 2, true);
  Trajectory t = *o.trajectory;
  REQUIRE(t.points.size() > 3);
  t.points[2].object.x += 0.25;
  CHECK(replay_trajectory(t).max_position_divergence >= 0.25 - 1e-12);
}

TEST_CASE("malformed trajectories and formats are rejected") {
  const EpisodeOutcome o = run_episode(kStill, named_scenario("training"), 5, true);
  const std::string text = format_trajectory(*o.trajectory, TrajectoryFormat::kNdjson);
  CHECK_THROWS_AS(parse_trajectory(text.substr(0, text.size() / 2)), FormatError);
  CHECK_THROWS_AS(parse_trajectory(""), FormatError);
  CHECK_THROWS_AS(parse_trajectory(format_trajectory(*o.trajectory,
                                                     TrajectoryFormat::kCsv)),
                  FormatError);
  CHECK_THROWS_AS(trajectory_format_from_string("xml"), InvalidInput);
  CHECK(trajectory_format_from_string("csv") == TrajectoryFormat::kCsv);
  EpisodeOutcome bare = o;
  bare.trajectory.reset();
  CHECK_THROWS_AS(export_trajectory(bare, TrajectoryFormat::kCsv, "unused.csv"),
                  ProtocolError);
}

TEST_CASE("named suites match the evaluation protocol") {
  const auto& names = evaluation_suite_names();
  CHECK(names == std::vector<std::string>{"training", "circular", "cross",
                                          "t_shape", "l_shape", "dual",
                                          "dynamic"});
  for (const auto& n : names) {
    const ScenarioSpec s = named_scenario(n);
    CHECK(s.max_steps == 200);
    CHECK(s.terminate_on_collision);
  }
  CHECK(named_scenario("dual").obstacle_count() == 2);
  CHECK(named_scenario("dynamic").dynamic);
  CHECK(named_scenario("dynamic").obstacle_speed == 0.1);
}

TEST_CASE("training draws never contain the held-out shapes") {
  const ScenarioSpec training = named_scenario("training", Phase::kTraining);
  for (const ObstacleGroup& g : training.obstacles) {
    CHECK(g.kind == ObstacleKind::kRectangle);
  }
  PushEnv env(training);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    env.reset(seed);
    for (const Obstacle& o : env.state().obstacles) {
      const auto* poly = std::get_if<ConvexPolygon>(&o.body.shape.geometry);
      REQUIRE(poly != nullptr);
      CHECK(poly->vertices.size() == 4);
    }
  }
  for (const char* held_out : {"cross", "t_shape", "l_shape"}) {
    for (const ObstacleGroup& g : named_scenario(held_out).obstacles) {
      CHECK(g.kind != ObstacleKind::kRectangle);
    }
  }
}

TEST_CASE("moving obstacles keep their speed between reversals") {
  ScenarioSpec scenario = named_scenario("dynamic");
  PushEnv env(scenario);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    env.reset(seed);
    for (int t = 0; t < 150 && !env.done(); ++t) {
      const Obstacle before = env.state().obstacles.front();
      env.step({5, 5});
      const Obstacle& after = env.state().obstacles.front();
      CHECK(std::abs(std::abs(after.velocity.y) - 0.1) < 1e-15);
      CHECK(after.body.pose.x == before.body.pose.x);
      if (after.velocity.y == before.velocity.y) {
        CHECK(std::abs(after.body.pose.y - before.body.pose.y) ==
              doctest::Approx(0.01).epsilon(1e-9));
      }
    }
  }
}

}  // namespace
}  // namespace pushgrid
