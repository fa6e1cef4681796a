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

#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "pushgrid/error.hpp"
#include "pushgrid/evalbench.hpp"
#include "pushgrid/grid.hpp"
#include "pushgrid/parallel.hpp"

namespace pushgrid::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Prefixes the key of a nested ConfigError.
template <typename F>
auto scoped(const std::string& prefix, F&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    const std::string marker = "': ";
    const auto at = what.find(marker);
    throw ConfigError(prefix + "." + e.key(),
                      at == std::string::npos ? what : what.substr(at + marker.size()));
  }
}

fs::path output_root(const std::string& configured) {
  if (const char* env = std::getenv("PUSHGRID_OUT_DIR"); env != nullptr && *env) {
    return env;
  }
  return configured.empty() ? fs::path("runs") : fs::path(configured);
}

// `base` under the root, or base-2, base-3, ... when taken.
fs::path fresh_dir(const fs::path& root, const std::string& base) {
  fs::path dir = root / base;
  for (int i = 2; fs::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

fs::path run_dir(const std::string& explicit_dir, const std::string& root,
                 const std::string& base) {
  if (!explicit_dir.empty()) {
    fs::create_directories(explicit_dir);
    return explicit_dir;
  }
  return fresh_dir(output_root(root), base);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string scientific(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

void print_iteration(std::ostream& out, const IterationRecord& r) {
  char line[200];
  std::snprintf(line, sizeof line,
                "update %4d  steps %9ld  reward %8.3f  success %5.1f%%  "
                "kl %.2e  lr %.2e  %.1fs\n",
                r.updates, r.env_steps, r.mean_episode_reward,
                100.0 * r.update.success_rate, r.update.approx_kl,
                r.update.learning_rate, r.seconds);
  out << line << std::flush;
}

std::vector<ScenarioSpec> evaluation_scenarios(const std::vector<std::string>& names) {
  std::vector<std::string> expanded;
  for (const std::string& n : names) {
    if (n == "all") {
      for (const auto& s : evaluation_suite_names()) expanded.push_back(s);
    } else {
      expanded.push_back(n);
    }
  }
  if (expanded.empty()) throw ConfigError("scenarios", "no scenario given");
  std::vector<ScenarioSpec> specs;
  std::set<std::string> seen;
  for (const std::string& n : expanded) {
    if (seen.insert(n).second) specs.push_back(named_scenario(n, Phase::kEvaluation));
  }
  return specs;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> extractor;
  std::optional<long> max_env_steps;
  std::optional<std::string> scenario;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.seed) rc.train.seed = *a.seed;
  rc.train.workers = a.workers.value_or(
      a.config.empty() ? WorkerPool::default_workers() : rc.train.workers);
  if (a.extractor) rc.train.extractor = extractor_kind_from_string(*a.extractor);
  if (a.max_env_steps) rc.train.max_env_steps = *a.max_env_steps;
  if (a.scenario) rc.scenario = named_scenario(*a.scenario, Phase::kTraining);
  rc.train.validate();
  rc.scenario.validate();

  const fs::path dir =
      run_dir(a.out, rc.output_root,
              std::string("train-") + to_string(rc.train.extractor) + "-s" +
                  std::to_string(rc.train.seed));
  write_json(dir / "config.json", to_json(rc));
  out << "run directory: " << dir.string() << "\n";
  Trainer trainer(rc.train, rc.scenario);
  train(trainer, dir, [&out](const IterationRecord& r) { print_iteration(out, r); });
  out << "final checkpoint: " << run_paths(dir).final_checkpoint.string() << "\n";
  return kExitOk;
}

struct FinetuneArgs {
  std::string checkpoint;
  std::string scenario = "dual";
  long steps = 0;
  std::optional<std::string> extractor;
  std::string out;
};

int cmd_finetune(const FinetuneArgs& a, std::ostream& out) {
  const ScenarioSpec scenario = named_scenario(a.scenario, Phase::kTraining);
  std::optional<ExtractorKind> expected;
  if (a.extractor) expected = extractor_kind_from_string(*a.extractor);
  if (a.steps < 0) throw ConfigError("steps", "must be >= 0");
  if (!fs::exists(a.checkpoint)) {
    throw FormatError("checkpoint not found: " + a.checkpoint);
  }
  const fs::path dir =
      run_dir(a.out, "", "finetune-" + scenario.name);
  json snapshot = {{"checkpoint", fs::absolute(a.checkpoint).string()},
                   {"scenario", scenario},
                   {"steps", a.steps}};
  if (expected) snapshot["extractor"] = to_string(*expected);
  write_json(dir / "config.json", snapshot);
  out << "run directory: " << dir.string() << "\n";
  const fs::path final_ckpt =
      fine_tune(a.checkpoint, scenario, a.steps, dir, expected,
                [&out](const IterationRecord& r) { print_iteration(out, r); });
  out << "final checkpoint: " << final_ckpt.string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::vector<std::string> scenarios{"all"};
  int episodes = 2000;
  std::uint64_t seed = 0;
  std::optional<int> workers;
  bool deterministic = true;
  int trajectories = 0;
  std::string format = "ndjson";
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const std::vector<ScenarioSpec> scenarios = evaluation_scenarios(a.scenarios);
  const TrajectoryFormat format = trajectory_format_from_string(a.format);
  if (a.episodes < 1) throw ConfigError("episodes", "must be >= 1");
  if (a.trajectories < 0) throw ConfigError("trajectories", "must be >= 0");
  LoadedAgent loaded = load_agent(a.checkpoint);

  SuiteOptions options;
  options.episodes = a.episodes;
  options.seed = a.seed;
  options.deterministic = a.deterministic;
  options.workers = a.workers.value_or(WorkerPool::default_workers());
  options.record = a.trajectories;

  const fs::path dir = run_dir(a.out, "", "eval-s" + std::to_string(a.seed));
  json names = json::array();
  for (const auto& s : scenarios) names.push_back(s.name);
  write_json(dir / "config.json", {{"checkpoint", fs::absolute(a.checkpoint).string()},
                                   {"scenarios", names},
                                   {"episodes", a.episodes},
                                   {"seed", a.seed},
                                   {"deterministic", a.deterministic}});

  const SuiteResult result = run_suite(*loaded.agent, scenarios, options);
  const std::string table = result.report.to_table();
  write_text(dir / "report.csv", result.report.to_csv());
  write_text(dir / "report.txt", table);
  const char* ext = format == TrajectoryFormat::kCsv ? ".csv" : ".ndjson";
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    for (const EpisodeOutcome& o : result.outcomes[s]) {
      if (!o.trajectory) continue;
      const int index = static_cast<int>(&o - result.outcomes[s].data());
      export_trajectory(o, format,
                        dir / "trajectories" /
                            (scenarios[s].name + "_" + std::to_string(index) + ext));
    }
  }
  out << table << "report: " << (dir / "report.csv").string() << "\n";
  return kExitOk;
}

struct ReplayArgs {
  std::string trajectory;
  std::string out;
};

int cmd_replay(const ReplayArgs& a, std::ostream& out) {
  const Trajectory t = read_trajectory(a.trajectory);
  const ReplayReport r = replay_trajectory(t);
  const fs::path dir =
      run_dir(a.out, "", "replay-" + fs::path(a.trajectory).stem().string());
  const OccupancyGrid grid = rasterize(t.initial.obstacle_bodies(),
                                       t.initial.workspace, t.scenario.resolution);
  write_pgm(grid, dir / "grid.pgm");
  write_text(dir / "trajectory.csv", format_trajectory(r.replayed, TrajectoryFormat::kCsv));
  const json summary = {{"trajectory", fs::absolute(a.trajectory).string()},
                        {"steps", r.steps},
                        {"max_position_divergence", r.max_position_divergence},
                        {"max_angle_divergence", r.max_angle_divergence},
                        {"max_reward_divergence", r.max_reward_divergence},
                        {"terminations_match", r.terminations_match}};
  write_json(dir / "replay.json", summary);
  out << "steps: " << r.steps << "\n"
      << "max position divergence: " << scientific(r.max_position_divergence) << " m\n"
      << "max angle divergence: " << scientific(r.max_angle_divergence) << " rad\n"
      << "max reward divergence: " << scientific(r.max_reward_divergence) << "\n"
      << "terminations match: " << (r.terminations_match ? "yes" : "no") << "\n"
      << "output: " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  static const std::set<std::string> kKeys{"train", "scenario", "noise",
                                           "randomize", "output_root"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError(key, "unknown config key");
  }
  RunConfig rc;
  if (j.contains("train")) {
    rc.train = scoped("train", [&] { return j.at("train").get<TrainConfig>(); });
  }
  if (j.contains("scenario")) {
    const json& s = j.at("scenario");
    rc.scenario = s.is_string()
                      ? scoped("scenario", [&] {
                          return named_scenario(s.get<std::string>(), Phase::kTraining);
                        })
                      : scoped("scenario", [&] { return s.get<ScenarioSpec>(); });
  }
  const auto toggle = [&j](const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) throw ConfigError(key, "expected true or false");
    out = j.at(key).get<bool>();
  };
  toggle("noise", rc.scenario.noise);
  toggle("randomize", rc.scenario.randomize);
  if (j.contains("output_root")) {
    if (!j.at("output_root").is_string()) {
      throw ConfigError("output_root", "expected a string");
    }
    rc.output_root = j.at("output_root").get<std::string>();
  }
  return rc;
}

json to_json(const RunConfig& c) {
  json j = {{"train", c.train}, {"scenario", c.scenario}};
  if (!c.output_root.empty()) j["output_root"] = c.output_root;
  return j;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config", path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Planar pushing with occupancy-grid attention"};
  app.name("pushgrid");
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a policy");
  train->add_option("--config", train_args.config, "Run configuration (JSON)");
  train->add_option("--seed", train_args.seed, "Root seed");
  train->add_option("--workers", train_args.workers,
                    "Threads (default: available cores)");
  train->add_option("--extractor", train_args.extractor, "attention, cnn or mlp");
  train->add_option("--max-env-steps", train_args.max_env_steps,
                    "Training budget in environment steps");
  train->add_option("--scenario", train_args.scenario, "Library scenario name");
  train->add_option("--out", train_args.out, "Run directory");

  FinetuneArgs ft_args;
  CLI::App* finetune = app.add_subcommand("finetune", "Continue training on a scenario");
  finetune->add_option("--checkpoint", ft_args.checkpoint, "Trainer checkpoint")
      ->required();
  finetune->add_option("--scenario", ft_args.scenario, "Library scenario name")
      ->capture_default_str();
  finetune->add_option("--steps", ft_args.steps, "Additional environment steps")
      ->required();
  finetune->add_option("--extractor", ft_args.extractor,
                       "Expected extractor of the checkpoint");
  finetune->add_option("--out", ft_args.out, "Run directory");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Trainer checkpoint")
      ->required();
  eval->add_option("--scenarios", eval_args.scenarios,
                   "Comma-separated scenario names or 'all'")
      ->delimiter(',')
      ->capture_default_str();
  eval->add_option("--episodes", eval_args.episodes, "Episodes per scenario")
      ->capture_default_str();
  eval->add_option("--seed", eval_args.seed, "Root seed")->capture_default_str();
  eval->add_option("--workers", eval_args.workers,
                   "Threads (default: available cores)");
  eval->add_flag("--deterministic,!--stochastic", eval_args.deterministic,
                 "Act with the distribution mode (default) or sample");
  eval->add_option("--trajectories", eval_args.trajectories,
                   "Export the first N episodes of each scenario")
      ->capture_default_str();
  eval->add_option("--format", eval_args.format, "Trajectory format: ndjson or csv")
      ->capture_default_str();
  eval->add_option("--out", eval_args.out, "Output directory");

  ReplayArgs replay_args;
  CLI::App* replay = app.add_subcommand("replay", "Re-simulate an NDJSON trajectory");
  replay->add_option("trajectory", replay_args.trajectory, "Trajectory file")
      ->required();
  replay->add_option("--out", replay_args.out, "Output directory");

  std::vector<const char*> argv{"pushgrid"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_args, out);
    if (finetune->parsed()) return cmd_finetune(ft_args, out);
    if (eval->parsed()) return cmd_eval(eval_args, out);
    if (replay->parsed()) return cmd_replay(replay_args, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArchitectureMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFault;
  }
  return kExitUsage;
}

}  // namespace pushgrid::cli
