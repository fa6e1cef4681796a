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

#include "pushgrid/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pushgrid/categorical.hpp"
#include "pushgrid/error.hpp"
#include "pushgrid/parallel.hpp"
#include "pushgrid/ppo.hpp"

namespace pushgrid {
namespace {

using nlohmann::json;

// Shortest text that parses back to the same double.
std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Termination termination_from_string(const std::string& name) {
  for (Termination t : {Termination::kNone, Termination::kSuccess,
                        Termination::kCollision, Termination::kTimeout,
                        Termination::kBoundary}) {
    if (name == to_string(t)) return t;
  }
  throw FormatError("unknown termination '" + name + "'");
}

// One episode slot of a lockstep block.
struct Slot {
  PushEnv env;
  Observation obs;
  EpisodeOutcome outcome;
  Rng rng;
  bool active = true;
};

// Actions for the active slots, in order.
using BlockPolicy = std::function<std::vector<Action>(
    std::vector<Slot>& slots, const std::vector<int>& active)>;

std::vector<EpisodeOutcome> run_block(const ScenarioSpec& scenario,
                                      std::span<const std::uint64_t> seeds,
                                      int record, const BlockPolicy& policy) {
  std::vector<Slot> slots;
  slots.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Slot s{PushEnv(scenario), {}, {}, make_rng(seeds[i], "policy"), true};
    s.obs = s.env.reset(seeds[i]);
    s.outcome.seed = seeds[i];
    if (static_cast<int>(i) < record) {
      s.outcome.trajectory = Trajectory{scenario, seeds[i],
                                        derive_seed(seeds[i], "noise"),
                                        s.env.state(), {}};
    }
    slots.push_back(std::move(s));
  }

  std::vector<int> active(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) active[i] = static_cast<int>(i);
  while (!active.empty()) {
    const std::vector<Action> actions = policy(slots, active);
    std::vector<int> still;
    for (std::size_t k = 0; k < active.size(); ++k) {
      Slot& s = slots[active[k]];
      const StepResult r = s.env.step(actions[k]);
      const SceneState& st = s.env.state();
      s.outcome.total_reward += r.reward;
      if (s.outcome.trajectory) {
        s.outcome.trajectory->points.push_back(
            {st.step_count, actions[k], st.pusher_pose, st.object_pose,
             r.reward, r.info.collision, r.termination});
      }
      if (r.done) {
        s.active = false;
        s.outcome.kind = r.termination;
        s.outcome.steps = st.step_count;
        s.outcome.final_pos_error = position_error(st);
        s.outcome.final_ang_error = angle_error(st);
      } else {
        s.obs = r.observation;
        still.push_back(active[k]);
      }
    }
    active = std::move(still);
  }

  std::vector<EpisodeOutcome> out;
  out.reserve(slots.size());
  for (Slot& s : slots) out.push_back(std::move(s.outcome));
  return out;
}

// Batched policy inference over the active slots of a block.
BlockPolicy agent_policy(Agent& agent, int block, bool deterministic) {
  auto memory =
      std::make_shared<LstmState>(LstmState::zeros(block, kLstmSize));
  return [&agent, memory, deterministic](std::vector<Slot>& slots,
                                         const std::vector<int>& active) {
    const auto n = static_cast<Eigen::Index>(active.size());
    std::vector<Observation> obs;
    obs.reserve(active.size());
    LstmState state{Matrix(n, kLstmSize), Matrix(n, kLstmSize)};
    for (Eigen::Index k = 0; k < n; ++k) {
      obs.push_back(slots[active[k]].obs);
      state.hidden.row(k) = memory->hidden.row(active[k]);
      state.cell.row(k) = memory->cell.row(active[k]);
    }
    const Matrix logits = agent.policy_step(obs, state);
    std::vector<Action> actions;
    actions.reserve(active.size());
    for (Eigen::Index k = 0; k < n; ++k) {
      memory->hidden.row(active[k]) = state.hidden.row(k);
      memory->cell.row(active[k]) = state.cell.row(k);
      const CategoricalPair dist = CategoricalPair::from_row(
          std::span(logits.data() + k * logits.cols(),
                    static_cast<std::size_t>(logits.cols())));
      actions.push_back(deterministic
                            ? mode(dist)
                            : sample_action(dist, slots[active[k]].rng).action);
    }
    return actions;
  };
}

json point_json(const TrajectoryPoint& p) {
  return {{"step", p.step},
          {"action", {p.action.bin_x, p.action.bin_y}},
          {"pusher", {p.pusher.x, p.pusher.y}},
          {"object", {p.object.x, p.object.y, p.object.theta}},
          {"reward", p.reward},
          {"collision", p.collision},
          {"termination", to_string(p.termination)}};
}

TrajectoryPoint point_from_json(const json& j) {
  TrajectoryPoint p;
  p.step = j.at("step").get<int>();
  const auto a = j.at("action").get<std::vector<int>>();
  const auto pu = j.at("pusher").get<std::vector<double>>();
  const auto ob = j.at("object").get<std::vector<double>>();
  if (a.size() != 2 || pu.size() != 2 || ob.size() != 3) {
    throw FormatError("trajectory step " + std::to_string(p.step) +
                      ": wrong field length");
  }
  p.action = {a[0], a[1]};
  p.pusher = {pu[0], pu[1], 0.0};
  p.object = {ob[0], ob[1], ob[2]};
  p.reward = j.at("reward").get<double>();
  p.collision = j.at("collision").get<bool>();
  p.termination = termination_from_string(j.at("termination").get<std::string>());
  return p;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed, std::string_view scenario,
                           int index) {
  return derive_seed(derive_seed(seed, scenario), "episode",
                     static_cast<std::uint64_t>(index));
}

EpisodeOutcome run_episode(const Controller& controller,
                           const ScenarioSpec& scenario, std::uint64_t seed,
                           bool record) {
  const std::uint64_t seeds[] = {seed};
  return run_block(scenario, seeds, record ? 1 : 0,
                   [&](std::vector<Slot>& slots, const std::vector<int>&) {
                     Slot& s = slots[0];
                     return std::vector<Action>{
                         controller(s.obs, s.env.state().step_count)};
                   })
      .front();
}

EpisodeOutcome run_episode(Agent& agent, const ScenarioSpec& scenario,
                           std::uint64_t seed, bool deterministic,
                           bool record) {
  const std::uint64_t seeds[] = {seed};
  return run_block(scenario, seeds, record ? 1 : 0,
                   agent_policy(agent, 1, deterministic))
      .front();
}

EpisodeOutcome run_episode(const std::filesystem::path& checkpoint,
                           const ScenarioSpec& scenario, std::uint64_t seed,
                           bool deterministic, bool record) {
  LoadedAgent loaded = load_agent(checkpoint);
  return run_episode(*loaded.agent, scenario, seed, deterministic, record);
}

double binomial_half_width(int hits, int trials) {
  if (trials <= 0) return 0.0;
  const double p = static_cast<double>(hits) / trials;
  return 100.0 * 1.96 * std::sqrt(p * (1.0 - p) / trials);
}

ScenarioMetrics aggregate(const std::string& scenario,
                          std::span<const EpisodeOutcome> outcomes) {
  ScenarioMetrics m;
  m.scenario = scenario;
  m.episodes = static_cast<int>(outcomes.size());
  long success_steps = 0;
  for (const EpisodeOutcome& o : outcomes) {
    switch (o.kind) {
      case Termination::kSuccess:
        ++m.successes;
        success_steps += o.steps;
        break;
      case Termination::kCollision:
        ++m.collisions;
        break;
      case Termination::kTimeout:
        ++m.timeouts;
        break;
      case Termination::kBoundary:
        ++m.boundaries;
        break;
      case Termination::kNone:
        throw InvalidInput("episode outcome without a termination");
    }
  }
  const auto rate = [&](int k) {
    return m.episodes > 0 ? 100.0 * k / m.episodes : 0.0;
  };
  m.success_rate = rate(m.successes);
  m.collision_rate = rate(m.collisions);
  m.timeout_rate = rate(m.timeouts);
  m.boundary_rate = rate(m.boundaries);
  m.success_ci = binomial_half_width(m.successes, m.episodes);
  m.collision_ci = binomial_half_width(m.collisions, m.episodes);
  m.timeout_ci = binomial_half_width(m.timeouts, m.episodes);
  m.boundary_ci = binomial_half_width(m.boundaries, m.episodes);
  m.mean_steps_to_success =
      m.successes > 0 ? static_cast<double>(success_steps) / m.successes
                      : std::numeric_limits<double>::quiet_NaN();
  return m;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "scenario,episodes,successes,collisions,timeouts,boundaries,"
        "success_rate,success_ci,collision_rate,collision_ci,timeout_rate,"
        "timeout_ci,boundary_rate,boundary_ci,mean_steps_to_success\n";
  for (const ScenarioMetrics& m : scenarios) {
    os << m.scenario << ',' << m.episodes << ',' << m.successes << ','
       << m.collisions << ',' << m.timeouts << ',' << m.boundaries << ','
       << fixed(m.success_rate, 4) << ',' << fixed(m.success_ci, 4) << ','
       << fixed(m.collision_rate, 4) << ',' << fixed(m.collision_ci, 4) << ','
       << fixed(m.timeout_rate, 4) << ',' << fixed(m.timeout_ci, 4) << ','
       << fixed(m.boundary_rate, 4) << ',' << fixed(m.boundary_ci, 4) << ','
       << fixed(m.mean_steps_to_success, 2) << '\n';
  }
  return os.str();
}

std::string MetricsReport::to_table() const {
  const auto cell = [](double rate, double ci) {
    return fixed(rate, 1) + " +/- " + fixed(ci, 1);
  };
  std::ostringstream os;
  char line[200];
  std::snprintf(line, sizeof line, "%-12s %8s %15s %15s %15s %15s %8s\n",
                "scenario", "episodes", "success %", "collision %",
                "timeout %", "boundary %", "steps");
  os << line;
  for (const ScenarioMetrics& m : scenarios) {
    std::snprintf(line, sizeof line, "%-12s %8d %15s %15s %15s %15s %8s\n",
                  m.scenario.c_str(), m.episodes,
                  cell(m.success_rate, m.success_ci).c_str(),
                  cell(m.collision_rate, m.collision_ci).c_str(),
                  cell(m.timeout_rate, m.timeout_ci).c_str(),
                  cell(m.boundary_rate, m.boundary_ci).c_str(),
                  fixed(m.mean_steps_to_success, 1).c_str());
    os << line;
  }
  return os.str();
}

SuiteResult run_suite(Agent& agent, const std::vector<ScenarioSpec>& scenarios,
                      const SuiteOptions& options) {
  if (scenarios.empty()) throw InvalidInput("run_suite: no scenarios");
  if (options.episodes < 1) throw InvalidInput("run_suite: episodes must be >= 1");

  struct Job {
    int scenario;
    int first;
    int count;
  };
  std::vector<Job> jobs;
  SuiteResult result;
  result.outcomes.resize(scenarios.size());
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    result.outcomes[s].resize(static_cast<std::size_t>(options.episodes));
    for (int first = 0; first < options.episodes; first += kEvalBlock) {
      jobs.push_back({static_cast<int>(s), first,
                      std::min(kEvalBlock, options.episodes - first)});
    }
  }

  WorkerPool pool(std::max(1, options.workers));
  pool.run(static_cast<int>(jobs.size()), [&](int i) {
    const Job& job = jobs[i];
    const ScenarioSpec& scenario = scenarios[job.scenario];
    std::vector<std::uint64_t> seeds;
    for (int e = job.first; e < job.first + job.count; ++e) {
      seeds.push_back(episode_seed(options.seed, scenario.name, e));
    }
    std::vector<EpisodeOutcome> out =
        run_block(scenario, seeds, std::max(0, options.record - job.first),
                  agent_policy(agent, job.count, options.deterministic));
    std::move(out.begin(), out.end(),
              result.outcomes[job.scenario].begin() + job.first);
  });

  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    result.report.scenarios.push_back(
        aggregate(scenarios[s].name, result.outcomes[s]));
  }
  return result;
}

SuiteResult run_suite(const std::filesystem::path& checkpoint,
                      const std::vector<ScenarioSpec>& scenarios,
                      const SuiteOptions& options) {
  LoadedAgent loaded = load_agent(checkpoint);
  return run_suite(*loaded.agent, scenarios, options);
}

TrajectoryFormat trajectory_format_from_string(std::string_view name) {
  if (name == "csv") return TrajectoryFormat::kCsv;
  if (name == "ndjson") return TrajectoryFormat::kNdjson;
  throw InvalidInput("unsupported trajectory format '" + std::string(name) +
                     "' (known: csv, ndjson)");
}

std::string format_trajectory(const Trajectory& t, TrajectoryFormat format) {
  std::ostringstream os;
  if (format == TrajectoryFormat::kCsv) {
    os << "step,action_x,action_y,pusher_x,pusher_y,object_x,object_y,"
          "object_theta,reward,collision,termination\n";
    for (const TrajectoryPoint& p : t.points) {
      os << p.step << ',' << p.action.bin_x << ',' << p.action.bin_y << ','
         << number(p.pusher.x) << ',' << number(p.pusher.y) << ','
         << number(p.object.x) << ',' << number(p.object.y) << ','
         << number(p.object.theta) << ',' << number(p.reward) << ','
         << (p.collision ? 1 : 0) << ',' << to_string(p.termination) << '\n';
    }
    return os.str();
  }
  const json header = {{"kind", "pushgrid-trajectory"},
                       {"version", 1},
                       {"scenario", t.scenario},
                       {"seed", t.seed},
                       {"noise_seed", t.noise_seed},
                       {"initial", t.initial},
                       {"steps", t.points.size()}};
  os << header.dump() << '\n';
  for (const TrajectoryPoint& p : t.points) os << point_json(p).dump() << '\n';
  return os.str();
}

void export_trajectory(const EpisodeOutcome& outcome, TrajectoryFormat format,
                       const std::filesystem::path& path) {
  if (!outcome.trajectory) {
    throw ProtocolError("export_trajectory: episode was run without recording");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f << format_trajectory(*outcome.trajectory, format);
  if (!f) throw FormatError("failed writing " + path.string());
}

Trajectory parse_trajectory(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  Trajectory t;
  try {
    if (!std::getline(in, line)) throw FormatError("empty trajectory file");
    const json header = json::parse(line);
    if (header.value("kind", "") != "pushgrid-trajectory") {
      throw FormatError("not a trajectory export (CSV exports cannot be replayed)");
    }
    if (header.at("version").get<int>() != 1) {
      throw FormatError("unsupported trajectory version");
    }
    t.scenario = header.at("scenario").get<ScenarioSpec>();
    t.seed = header.at("seed").get<std::uint64_t>();
    t.noise_seed = header.at("noise_seed").get<std::uint64_t>();
    t.initial = header.at("initial").get<SceneState>();
    const auto steps = header.at("steps").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      t.points.push_back(point_from_json(json::parse(line)));
    }
    if (t.points.size() != steps) {
      throw FormatError("trajectory truncated: header promises " +
                        std::to_string(steps) + " steps, found " +
                        std::to_string(t.points.size()));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed trajectory: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed trajectory scenario: ") + e.what());
  }
  return t;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_trajectory(buf.str());
}

ReplayReport replay_trajectory(const Trajectory& t) {
  ReplayReport report;
  report.replayed = t;
  report.replayed.points.clear();
  PushEnv env(t.scenario);
  env.restore(t.initial, t.noise_seed);
  for (const TrajectoryPoint& logged : t.points) {
    if (env.done()) {
      report.terminations_match = false;
      break;
    }
    const StepResult r = env.step(logged.action);
    const SceneState& st = env.state();
    const TrajectoryPoint p{st.step_count, logged.action, st.pusher_pose,
                            st.object_pose, r.reward, r.info.collision,
                            r.termination};
    report.max_position_divergence = std::max(
        {report.max_position_divergence,
         norm(p.pusher.position() - logged.pusher.position()),
         norm(p.object.position() - logged.object.position())});
    report.max_angle_divergence =
        std::max(report.max_angle_divergence,
                 std::abs(wrap_angle(p.object.theta - logged.object.theta)));
    report.max_reward_divergence =
        std::max(report.max_reward_divergence, std::abs(p.reward - logged.reward));
    if (p.termination != logged.termination || p.collision != logged.collision) {
      report.terminations_match = false;
    }
    report.replayed.points.push_back(p);
    ++report.steps;
  }
  return report;
}

void to_json(nlohmann::json& j, const ScenarioMetrics& m) {
  j = {{"scenario", m.scenario},
       {"episodes", m.episodes},
       {"successes", m.successes},
       {"collisions", m.collisions},
       {"timeouts", m.timeouts},
       {"boundaries", m.boundaries},
       {"success_rate", m.success_rate},
       {"collision_rate", m.collision_rate},
       {"timeout_rate", m.timeout_rate},
       {"boundary_rate", m.boundary_rate}};
}

}  // namespace pushgrid
