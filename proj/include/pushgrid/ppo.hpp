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

#ifndef PUSHGRID_PPO_HPP_
#define PUSHGRID_PPO_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pushgrid/checkpoint.hpp"
#include "pushgrid/env.hpp"
#include "pushgrid/optimizer.hpp"
#include "pushgrid/parallel.hpp"
#include "pushgrid/policy.hpp"

namespace pushgrid {

struct TrainConfig {
  int num_envs = 64;
  int rollout_length = 120;
  int update_epochs = 5;
  int minibatches = 4;  // whole-environment sequences per minibatch
  double clip_epsilon = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double kl_target = 0.01;
  double lr_init = 3e-4;
  double lr_min = 1e-6;
  double lr_max = 1e-2;
  double max_grad_norm = 1.0;
  long max_env_steps = 2'000'000;
  std::uint64_t seed = 0;
  ExtractorKind extractor = ExtractorKind::kAttention;
  int checkpoint_interval = 10;  // updates between checkpoints
  int workers = 1;               // threads for env stepping and updates
  int feature_chunk = 16;        // rows per extractor recompute chunk

  long batch_size() const {
    return static_cast<long>(num_envs) * rollout_length;
  }
  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

NetworkSpec network_spec(ExtractorKind extractor, const ScenarioSpec& scenario);
void to_json(nlohmann::json& j, const NetworkSpec& s);
void from_json(const nlohmann::json& j, NetworkSpec& s);

// Time-major storage: entry (t, e) lives at index t * num_envs + e.
struct RolloutBuffer {
  int num_envs = 0;
  int length = 0;
  std::vector<Observation> observations;
  std::vector<Action> actions;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd values;
  Eigen::VectorXd rewards;      // after timeout bootstrapping
  Eigen::VectorXd raw_rewards;  // as returned by the environment
  std::vector<std::uint8_t> dones;
  std::vector<Termination> terminations;
  // Set where the recurrent state was zeroed before acting at (t, e).
  std::vector<std::uint8_t> starts;
  RecurrentState initial;        // before the resets of step 0
  Eigen::VectorXd last_values;   // V of the observation after the rollout
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  RolloutBuffer() = default;
  RolloutBuffer(int num_envs, int length);
  int size() const { return num_envs * length; }
  int index(int t, int e) const { return t * num_envs + e; }
};

// Carries recurrent memory and episode-start flags between rollouts.
struct RolloutCursor {
  RecurrentState state;
  std::vector<std::uint8_t> starts;

  static RolloutCursor fresh(int num_envs);
};

struct RolloutSummary {
  int episodes = 0;
  int successes = 0;
  int collisions = 0;
  int timeouts = 0;
  int boundaries = 0;
  double mean_reward = 0.0;  // per step, before bootstrapping
};
RolloutSummary summarize(const RolloutBuffer& buffer);

// Samples actions from the categorical heads, stepping all environments.
// Timeout rewards are bootstrapped with the value of the terminal
// observation under the value memory that produced it.
RolloutBuffer collect_rollout(Agent& agent, VectorEnv& envs,
                              RolloutCursor& cursor, int length, Rng& rng,
                              double discount);

double bootstrap_timeout(double reward, double value_estimate, double discount);

struct Gae {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};
Gae compute_gae(std::span<const double> rewards, std::span<const double> values,
                std::span<const std::uint8_t> dones, double bootstrap_value,
                double discount = 0.99, double lambda = 0.95);

// Fills buffer.advantages and buffer.returns env by env.
void compute_advantages(RolloutBuffer& buffer, double discount, double lambda);

// Centers and scales to unit population std. A constant input is only
// centered.
void normalize_advantages(Eigen::VectorXd& advantages);

double adapt_lr(double current_lr, double measured_kl, double kl_target = 0.01,
                double lr_min = 1e-6, double lr_max = 1e-2);

struct LossOptions {
  double clip_epsilon = 0.2;
  bool clipped = true;  // false drops the clipped branch entirely
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  bool entropy_term = true;  // false removes entropy from the graph
  int feature_chunk = 16;
};

struct MinibatchResult {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double max_ratio_deviation = 0.0;  // max |ratio - 1|
  Eigen::VectorXd log_probs;         // time-major over the chosen envs
  Eigen::VectorXd values;
};

// Replays whole sequences of the chosen environments from their stored
// initial memory. With `backward` set, gradients of the loss are added to
// the agent parameters; extractor activations are recomputed in chunks
// rather than kept for the whole sequence. Chunks run on `pool` when given;
// results do not depend on its size.
MinibatchResult evaluate_minibatch(Agent& agent, const RolloutBuffer& buffer,
                                   std::span<const int> envs,
                                   const LossOptions& options, bool backward,
                                   WorkerPool* pool = nullptr);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double learning_rate = 0.0;
  double success_rate = 0.0;
  double grad_norm = 0.0;
  std::vector<MinibatchResult> minibatches;  // log_probs/values left empty
};

// Epochs over shuffled whole-environment minibatches. The learning rate is
// adapted from each minibatch's KL estimate before its optimizer step.
// Throws TrainingFault on a non-finite loss.
UpdateStats ppo_update(Agent& agent, Adam& optimizer,
                       const RolloutBuffer& buffer, const TrainConfig& config,
                       Rng& shuffle_rng, bool clipped = true,
                       WorkerPool* pool = nullptr);

struct IterationRecord {
  long env_steps = 0;
  int updates = 0;
  RolloutSummary rollout;
  UpdateStats update;
  double mean_episode_reward = 0.0;  // over episodes finished in the rollout
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

// Owns the agent, optimizer, environments and random streams of one run.
class Trainer {
 public:
  Trainer(TrainConfig config, ScenarioSpec scenario);

  // Restores a trainer bit for bit. Throws FormatError or
  // ArchitectureMismatch.
  static Trainer load(const std::filesystem::path& path);

  IterationRecord iterate();
  void save(const std::filesystem::path& path) const;

  // Continues on another scenario with the same networks and optimizer
  // state; environments and recurrent memory start afresh.
  void switch_scenario(const ScenarioSpec& scenario);

  Agent& agent() { return *agent_; }
  Adam& optimizer() { return optimizer_; }
  TrainConfig& config() { return config_; }
  const TrainConfig& config() const { return config_; }
  const ScenarioSpec& scenario() const { return scenario_; }
  VectorEnv& envs() { return *envs_; }
  long env_steps() const { return env_steps_; }
  int updates() const { return updates_; }

 private:
  Trainer(TrainConfig config, ScenarioSpec scenario, bool initialize);
  CheckpointData checkpoint() const;

  TrainConfig config_;
  ScenarioSpec scenario_;
  std::unique_ptr<Agent> agent_;
  Adam optimizer_;
  std::unique_ptr<VectorEnv> envs_;
  std::unique_ptr<WorkerPool> pool_;  // update-time extractor chunks
  RolloutCursor cursor_;
  Rng policy_rng_;
  Rng shuffle_rng_;
  Eigen::VectorXd episode_returns_;  // running undiscounted returns
  long env_steps_ = 0;
  int updates_ = 0;
  int scenario_epoch_ = 0;  // bumps on switch_scenario
};

struct RunPaths {
  std::filesystem::path metrics;      // NDJSON, one record per update
  std::filesystem::path checkpoints;  // directory
  std::filesystem::path final_checkpoint;
};
RunPaths run_paths(const std::filesystem::path& run_dir);

// Iterates until max_env_steps, appending metrics and writing checkpoints
// every checkpoint_interval updates and at the end. A training fault
// writes fault.ckpt into the run directory before propagating. `progress`
// sees every record after it is logged.
using ProgressFn = std::function<void(const IterationRecord&)>;
void train(Trainer& trainer, const std::filesystem::path& run_dir,
           const ProgressFn& progress = {});

// Loads `checkpoint`, checks the architecture against `expected` when
// given, and trains `steps` more environment steps on `scenario`. Zero steps
// copies the checkpoint unchanged. Returns the final checkpoint path.
std::filesystem::path fine_tune(const std::filesystem::path& checkpoint,
                                const ScenarioSpec& scenario, long steps,
                                const std::filesystem::path& run_dir,
                                std::optional<ExtractorKind> expected = {},
                                const ProgressFn& progress = {});

// Networks of a trainer checkpoint, for evaluation.
struct LoadedAgent {
  std::unique_ptr<Agent> agent;
  TrainConfig config;
  ScenarioSpec scenario;
};
LoadedAgent load_agent(const std::filesystem::path& checkpoint);

}  // namespace pushgrid

#endif  // PUSHGRID_PPO_HPP_
