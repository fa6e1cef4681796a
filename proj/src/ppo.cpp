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

#include "pushgrid/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "pushgrid/categorical.hpp"
#include "pushgrid/error.hpp"
#include "pushgrid/parallel.hpp"
#include "pushgrid/scene_io.hpp"

namespace pushgrid {

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  const auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(num_envs >= 1, "num_envs", "must be >= 1");
  require(rollout_length >= 1, "rollout_length", "must be >= 1");
  require(update_epochs >= 1, "update_epochs", "must be >= 1");
  require(minibatches >= 1, "minibatches", "must be >= 1");
  require(clip_epsilon > 0.0, "clip_epsilon", "must be > 0");
  require(discount >= 0.0 && discount <= 1.0, "discount", "must be in [0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda",
          "must be in [0, 1]");
  require(entropy_coef >= 0.0, "entropy_coef", "must be >= 0");
  require(value_coef >= 0.0, "value_coef", "must be >= 0");
  require(kl_target > 0.0, "kl_target", "must be > 0");
  require(lr_min > 0.0 && lr_min <= lr_max, "lr_min",
          "need 0 < lr_min <= lr_max");
  require(lr_init >= lr_min && lr_init <= lr_max, "lr_init",
          "must lie within [lr_min, lr_max]");
  require(max_grad_norm > 0.0, "max_grad_norm", "must be > 0");
  require(max_env_steps >= 0, "max_env_steps", "must be >= 0");
  require(checkpoint_interval >= 1, "checkpoint_interval", "must be >= 1");
  require(workers >= 1, "workers", "must be >= 1");
  require(feature_chunk >= 1, "feature_chunk", "must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"num_envs", c.num_envs},
       {"rollout_length", c.rollout_length},
       {"update_epochs", c.update_epochs},
       {"minibatches", c.minibatches},
       {"clip_epsilon", c.clip_epsilon},
       {"discount", c.discount},
       {"gae_lambda", c.gae_lambda},
       {"entropy_coef", c.entropy_coef},
       {"value_coef", c.value_coef},
       {"kl_target", c.kl_target},
       {"lr_init", c.lr_init},
       {"lr_min", c.lr_min},
       {"lr_max", c.lr_max},
       {"max_grad_norm", c.max_grad_norm},
       {"max_env_steps", c.max_env_steps},
       {"seed", c.seed},
       {"extractor", to_string(c.extractor)},
       {"checkpoint_interval", c.checkpoint_interval},
       {"workers", c.workers},
       {"feature_chunk", c.feature_chunk}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train", "expected an object");
  static const std::set<std::string> kKeys{
      "num_envs",      "rollout_length", "update_epochs", "minibatches",
      "clip_epsilon",  "discount",       "gae_lambda",    "entropy_coef",
      "value_coef",    "kl_target",      "lr_init",       "lr_min",
      "lr_max",        "max_grad_norm",  "max_env_steps", "seed",
      "extractor",     "checkpoint_interval", "workers",  "feature_chunk"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError(key, "unknown training key");
  }
  const auto read = [&j]<typename T>(const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
  read("num_envs", c.num_envs);
  read("rollout_length", c.rollout_length);
  read("update_epochs", c.update_epochs);
  read("minibatches", c.minibatches);
  read("clip_epsilon", c.clip_epsilon);
  read("discount", c.discount);
  read("gae_lambda", c.gae_lambda);
  read("entropy_coef", c.entropy_coef);
  read("value_coef", c.value_coef);
  read("kl_target", c.kl_target);
  read("lr_init", c.lr_init);
  read("lr_min", c.lr_min);
  read("lr_max", c.lr_max);
  read("max_grad_norm", c.max_grad_norm);
  read("max_env_steps", c.max_env_steps);
  read("seed", c.seed);
  read("checkpoint_interval", c.checkpoint_interval);
  read("workers", c.workers);
  read("feature_chunk", c.feature_chunk);
  if (j.contains("extractor")) {
    std::string name;
    read("extractor", name);
    c.extractor = extractor_kind_from_string(name);
  }
}

NetworkSpec network_spec(ExtractorKind extractor, const ScenarioSpec& scenario) {
  NetworkSpec spec;
  spec.extractor = extractor;
  spec.grid = GridShape{scenario.grid_rows, scenario.grid_cols};
  spec.workspace = scenario.workspace();
  return spec;
}

void to_json(nlohmann::json& j, const NetworkSpec& s) {
  j = {{"extractor", to_string(s.extractor)},
       {"grid_rows", s.grid.rows},
       {"grid_cols", s.grid.cols},
       {"workspace", s.workspace}};
}

void from_json(const nlohmann::json& j, NetworkSpec& s) {
  s.extractor = extractor_kind_from_string(j.at("extractor").get<std::string>());
  s.grid = GridShape{j.at("grid_rows").get<int>(), j.at("grid_cols").get<int>()};
  s.workspace = j.at("workspace").get<Workspace>();
}

// ---------------------------------------------------------------- rollout

RolloutBuffer::RolloutBuffer(int envs, int steps)
    : num_envs(envs),
      length(steps),
      observations(static_cast<std::size_t>(envs) * steps),
      actions(observations.size()),
      log_probs(Eigen::VectorXd::Zero(size())),
      values(Eigen::VectorXd::Zero(size())),
      rewards(Eigen::VectorXd::Zero(size())),
      raw_rewards(Eigen::VectorXd::Zero(size())),
      dones(observations.size(), 0),
      terminations(observations.size(), Termination::kNone),
      starts(observations.size(), 0),
      initial(RecurrentState::zeros(envs)),
      last_values(Eigen::VectorXd::Zero(envs)),
      advantages(Eigen::VectorXd::Zero(size())),
      returns(Eigen::VectorXd::Zero(size())) {}

RolloutCursor RolloutCursor::fresh(int num_envs) {
  return {RecurrentState::zeros(num_envs),
          std::vector<std::uint8_t>(static_cast<std::size_t>(num_envs), 1)};
}

RolloutSummary summarize(const RolloutBuffer& buffer) {
  RolloutSummary s;
  for (int i = 0; i < buffer.size(); ++i) {
    if (!buffer.dones[i]) continue;
    ++s.episodes;
    switch (buffer.terminations[i]) {
      case Termination::kSuccess: ++s.successes; break;
      case Termination::kCollision: ++s.collisions; break;
      case Termination::kTimeout: ++s.timeouts; break;
      case Termination::kBoundary: ++s.boundaries; break;
      case Termination::kNone: break;
    }
  }
  if (buffer.size() > 0) s.mean_reward = buffer.raw_rewards.mean();
  return s;
}

double bootstrap_timeout(double reward, double value_estimate, double discount) {
  return reward + discount * value_estimate;
}

namespace {

Matrix select_rows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

LstmState select_rows(const LstmState& s, std::span<const int> rows) {
  return {select_rows(s.hidden, rows), select_rows(s.cell, rows)};
}

}  // namespace

RolloutBuffer collect_rollout(Agent& agent, VectorEnv& envs,
                              RolloutCursor& cursor, int length, Rng& rng,
                              double discount) {
  const int n = envs.size();
  if (static_cast<int>(cursor.starts.size()) != n ||
      cursor.state.policy.hidden.rows() != n) {
    throw BatchError("rollout cursor does not match the environment count");
  }
  RolloutBuffer buf(n, length);
  buf.initial = cursor.state;
  std::vector<Observation> obs = envs.current();
  std::vector<Action> actions(static_cast<std::size_t>(n));
  for (int t = 0; t < length; ++t) {
    cursor.state.reset_rows(cursor.starts);
    Agent::StepOutput out = agent.step(obs, cursor.state);
    for (int e = 0; e < n; ++e) {
      const int k = buf.index(t, e);
      const auto row = out.logits.row(e);
      const SampledAction s = sample_action(
          CategoricalPair::from_row({row.data(), static_cast<std::size_t>(row.size())}),
          rng);
      actions[e] = s.action;
      buf.observations[k] = obs[e];
      buf.actions[k] = s.action;
      buf.log_probs[k] = s.log_prob;
      buf.values[k] = out.values[e];
      buf.starts[k] = cursor.starts[e];
    }
    VectorEnv::Batch batch = envs.step(actions);

    std::vector<int> timeouts;
    for (int e = 0; e < n; ++e) {
      const StepResult& r = batch.results[e];
      const int k = buf.index(t, e);
      buf.raw_rewards[k] = r.reward;
      buf.rewards[k] = r.reward;
      buf.dones[k] = r.done ? 1 : 0;
      buf.terminations[k] = r.termination;
      if (r.termination == Termination::kTimeout) timeouts.push_back(e);
    }
    if (!timeouts.empty()) {
      std::vector<Observation> terminal;
      for (int e : timeouts) terminal.push_back(batch.results[e].observation);
      const Eigen::VectorXd v =
          agent.value_of(terminal, select_rows(out.next.value, timeouts));
      for (std::size_t i = 0; i < timeouts.size(); ++i) {
        const int k = buf.index(t, timeouts[i]);
        buf.rewards[k] = bootstrap_timeout(buf.rewards[k], v[i], discount);
      }
    }
    cursor.state = std::move(out.next);
    for (int e = 0; e < n; ++e) cursor.starts[e] = buf.dones[buf.index(t, e)];
    obs = std::move(batch.next);
  }
  RecurrentState after = cursor.state;
  after.reset_rows(cursor.starts);
  buf.last_values = agent.value_of(obs, after.value);
  return buf;
}

// ---------------------------------------------------------------- advantages

Gae compute_gae(std::span<const double> rewards, std::span<const double> values,
                std::span<const std::uint8_t> dones, double bootstrap_value,
                double discount, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw ShapeMismatch("compute_gae: sequences differ in length");
  }
  Gae out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  double next_value = bootstrap_value;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double keep = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + discount * next_value * keep - values[i];
    running = delta + discount * lambda * keep * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
    next_value = values[i];
  }
  return out;
}

void compute_advantages(RolloutBuffer& buffer, double discount, double lambda) {
  const int n = buffer.num_envs;
  const int len = buffer.length;
  std::vector<double> r(len), v(len);
  std::vector<std::uint8_t> d(len);
  for (int e = 0; e < n; ++e) {
    for (int t = 0; t < len; ++t) {
      const int k = buffer.index(t, e);
      r[t] = buffer.rewards[k];
      v[t] = buffer.values[k];
      d[t] = buffer.dones[k];
    }
    const Gae g = compute_gae(r, v, d, buffer.last_values[e], discount, lambda);
    for (int t = 0; t < len; ++t) {
      buffer.advantages[buffer.index(t, e)] = g.advantages[t];
      buffer.returns[buffer.index(t, e)] = g.returns[t];
    }
  }
}

void normalize_advantages(Eigen::VectorXd& advantages) {
  if (advantages.size() == 0) return;
  const double mean = advantages.mean();
  advantages.array() -= mean;
  const double std = std::sqrt(advantages.squaredNorm() /
                               static_cast<double>(advantages.size()));
  if (std > 0.0) advantages /= std;
}

double adapt_lr(double current_lr, double measured_kl, double kl_target,
                double lr_min, double lr_max) {
  double lr = current_lr;
  if (measured_kl > 2.0 * kl_target) {
    lr = current_lr / 1.5;
  } else if (measured_kl < 0.5 * kl_target) {
    lr = current_lr * 1.5;
  }
  return std::clamp(lr, lr_min, lr_max);
}

// ---------------------------------------------------------------- update

namespace {

// Extractor inputs regrouped so that each chunk holds consecutive steps of
// one environment; rows[q] is the time-major row of input q. Consecutive
// steps usually share a grid, which the extractors exploit.
struct ChunkPlan {
  std::vector<ExtractorInput> inputs;
  std::vector<int> rows;
  int chunk = 1;

  int chunks() const {
    return (static_cast<int>(inputs.size()) + chunk - 1) / chunk;
  }
  std::pair<int, int> range(int c) const {
    const int begin = c * chunk;
    return {begin, std::min<int>(begin + chunk, static_cast<int>(inputs.size()))};
  }
};

ChunkPlan plan_chunks(const std::vector<ExtractorInput>& time_major, int steps,
                      int width, int chunk) {
  ChunkPlan plan;
  plan.chunk = chunk;
  plan.inputs.reserve(time_major.size());
  plan.rows.reserve(time_major.size());
  for (int j = 0; j < width; ++j) {
    for (int t = 0; t < steps; ++t) {
      plan.rows.push_back(t * width + j);
      plan.inputs.push_back(time_major[plan.rows.back()]);
    }
  }
  return plan;
}

void for_each_chunk(WorkerPool* pool, int count,
                    const std::function<void(int)>& fn) {
  if (pool != nullptr && pool->workers() > 1 && count > 1) {
    pool->run(count, fn);
  } else {
    for (int i = 0; i < count; ++i) fn(i);
  }
}

// Extractor output without keeping any graph beyond one chunk.
Matrix features_of(RecurrentNet& net, const ChunkPlan& plan, WorkerPool* pool) {
  Matrix out(static_cast<Eigen::Index>(plan.inputs.size()), kFeatureSize);
  for_each_chunk(pool, plan.chunks(), [&](int c) {
    const auto [begin, end] = plan.range(c);
    Tape tape;
    const Var f = net.extract(
        tape, std::span(plan.inputs).subspan(begin, end - begin));
    for (int q = begin; q < end; ++q) out.row(plan.rows[q]) = f.value().row(q - begin);
  });
  return out;
}

// Recomputes each chunk and pushes its slice of the feature gradient into
// the extractor parameters. Chunks run in waves with private gradient sinks
// that are merged in chunk order, so the sum does not depend on the number
// of workers.
void backprop_features(RecurrentNet& net, const ChunkPlan& plan,
                       const Matrix& grad, WorkerPool* pool) {
  const int chunks = plan.chunks();
  const int wave = pool != nullptr ? std::max(1, pool->workers()) : 1;
  for (int first = 0; first < chunks; first += wave) {
    const int count = std::min(wave, chunks - first);
    std::vector<GradientSink> sinks(static_cast<std::size_t>(count));
    for_each_chunk(pool, count, [&](int k) {
      const auto [begin, end] = plan.range(first + k);
      Matrix seed(end - begin, kFeatureSize);
      for (int q = begin; q < end; ++q) seed.row(q - begin) = grad.row(plan.rows[q]);
      if (seed.isZero(0.0)) return;
      Tape tape;
      tape.set_gradient_sink(&sinks[k]);
      const Var f = net.extract(
          tape, std::span(plan.inputs).subspan(begin, end - begin));
      tape.backward(f, seed);
    });
    for (GradientSink& sink : sinks) {
      for (auto& [param, g] : sink) param->grad += g;
    }
  }
}

// Runs the recurrent core over T steps of M sequences laid out time-major
// and returns the head output for every row.
Var unroll(Tape& tape, RecurrentNet& net, Var features, Var state,
           const LstmState& initial, const std::vector<Eigen::VectorXd>& keep,
           const std::vector<bool>& any_reset, int steps, int width) {
  const Var embedded = net.embed_state(tape, state);
  LstmVars memory{tape.constant(initial.hidden), tape.constant(initial.cell)};
  std::vector<Var> hidden;
  hidden.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    if (any_reset[t]) {
      memory.hidden = ad::scale_rows(memory.hidden, keep[t]);
      memory.cell = ad::scale_rows(memory.cell, keep[t]);
    }
    memory = net.recur_embedded(tape, ad::slice_rows(features, t * width, width),
                                ad::slice_rows(embedded, t * width, width),
                                memory);
    hidden.push_back(memory.hidden);
  }
  return net.head(tape, ad::concat_rows(hidden));
}

}  // namespace

MinibatchResult evaluate_minibatch(Agent& agent, const RolloutBuffer& buffer,
                                   std::span<const int> envs,
                                   const LossOptions& options, bool backward,
                                   WorkerPool* pool) {
  const int width = static_cast<int>(envs.size());
  const int steps = buffer.length;
  const int rows = width * steps;
  if (width == 0) throw InvalidInput("evaluate_minibatch: no environments");

  std::vector<Observation> obs(static_cast<std::size_t>(rows));
  std::vector<Action> actions(obs.size());
  Matrix old_log_prob(rows, 1), advantage(rows, 1), target(rows, 1);
  std::vector<Eigen::VectorXd> keep(static_cast<std::size_t>(steps),
                                    Eigen::VectorXd::Ones(width));
  std::vector<bool> any_reset(static_cast<std::size_t>(steps), false);
  for (int t = 0; t < steps; ++t) {
    for (int j = 0; j < width; ++j) {
      const int k = buffer.index(t, envs[j]);
      const int r = t * width + j;
      obs[r] = buffer.observations[k];
      actions[r] = buffer.actions[k];
      old_log_prob(r, 0) = buffer.log_probs[k];
      advantage(r, 0) = buffer.advantages[k];
      target(r, 0) = buffer.returns[k];
      if (buffer.starts[k]) {
        keep[t][j] = 0.0;
        any_reset[t] = true;
      }
    }
  }
  const ChunkPlan plan =
      plan_chunks(extractor_inputs(obs), steps, width, options.feature_chunk);
  const Matrix state = state_features(obs, agent.spec().workspace);

  Tape tape;
  const Var policy_features = tape.leaf(features_of(agent.policy(), plan, pool));
  const Var value_features = tape.leaf(features_of(agent.value(), plan, pool));
  const Var state_var = tape.constant(state);

  const Var logits =
      unroll(tape, agent.policy(), policy_features, state_var,
             select_rows(buffer.initial.policy, envs), keep, any_reset, steps,
             width);
  const Var values =
      unroll(tape, agent.value(), value_features, state_var,
             select_rows(buffer.initial.value, envs), keep, any_reset, steps,
             width);

  const Var log_prob = action_log_prob(logits, actions);
  const Var ratio = ad::exp(ad::sub(log_prob, tape.constant(old_log_prob)));
  const Var adv = tape.constant(advantage);
  Var objective = ad::mul(ratio, adv);
  if (options.clipped) {
    const Var clipped =
        ad::mul(ad::clamp(ratio, 1.0 - options.clip_epsilon,
                          1.0 + options.clip_epsilon),
                adv);
    objective = ad::minimum(objective, clipped);
  }
  const Var policy_loss = ad::scale(ad::mean(objective), -1.0);
  const Var value_loss =
      ad::mean(ad::square(ad::sub(values, tape.constant(target))));
  const Var entropy = ad::mean(action_entropy(logits));
  Var loss = ad::add(policy_loss, ad::scale(value_loss, options.value_coef));
  if (options.entropy_term) {
    loss = ad::sub(loss, ad::scale(entropy, options.entropy_coef));
  }

  MinibatchResult out;
  out.loss = loss.value()(0, 0);
  out.policy_loss = policy_loss.value()(0, 0);
  out.value_loss = value_loss.value()(0, 0);
  out.entropy = entropy.value()(0, 0);
  out.log_probs = Eigen::Map<const Eigen::VectorXd>(log_prob.value().data(), rows);
  out.values = Eigen::Map<const Eigen::VectorXd>(values.value().data(), rows);
  const Eigen::ArrayXd deviation =
      (ratio.value().col(0).array() - 1.0).abs();
  out.approx_kl = (old_log_prob.col(0) - out.log_probs).mean();
  out.clip_fraction =
      (deviation > options.clip_epsilon).cast<double>().mean();
  out.max_ratio_deviation = deviation.maxCoeff();

  if (backward && std::isfinite(out.loss)) {
    tape.backward(loss);
    backprop_features(agent.policy(), plan, tape.grad(policy_features), pool);
    backprop_features(agent.value(), plan, tape.grad(value_features), pool);
  }
  return out;
}

UpdateStats ppo_update(Agent& agent, Adam& optimizer,
                       const RolloutBuffer& buffer, const TrainConfig& config,
                       Rng& shuffle_rng, bool clipped, WorkerPool* pool) {
  const int n = buffer.num_envs;
  const int groups = std::min(config.minibatches, n);
  LossOptions options;
  options.clip_epsilon = config.clip_epsilon;
  options.clipped = clipped;
  options.value_coef = config.value_coef;
  options.entropy_coef = config.entropy_coef;
  options.feature_chunk = config.feature_chunk;

  const ParamList& params = optimizer.params();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  UpdateStats stats;
  for (int epoch = 0; epoch < config.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (int g = 0; g < groups; ++g) {
      const int begin = g * n / groups;
      const int end = (g + 1) * n / groups;
      const std::span<const int> envs(order.data() + begin,
                                      static_cast<std::size_t>(end - begin));
      zero_grads(params);
      MinibatchResult r = evaluate_minibatch(agent, buffer, envs, options, true, pool);
      if (!std::isfinite(r.loss)) {
        throw TrainingFault("non-finite loss in epoch " + std::to_string(epoch) +
                            ", minibatch " + std::to_string(g));
      }
      optimizer.set_learning_rate(adapt_lr(optimizer.learning_rate(),
                                           r.approx_kl, config.kl_target,
                                           config.lr_min, config.lr_max));
      stats.grad_norm = clip_grad_norm(params, config.max_grad_norm);
      optimizer.step();

      stats.policy_loss += r.policy_loss;
      stats.value_loss += r.value_loss;
      stats.entropy += r.entropy;
      stats.approx_kl += r.approx_kl;
      stats.clip_fraction += r.clip_fraction;
      r.log_probs.resize(0);
      r.values.resize(0);
      stats.minibatches.push_back(std::move(r));
    }
  }
  const double count = static_cast<double>(stats.minibatches.size());
  stats.policy_loss /= count;
  stats.value_loss /= count;
  stats.entropy /= count;
  stats.approx_kl /= count;
  stats.clip_fraction /= count;
  stats.learning_rate = optimizer.learning_rate();
  const RolloutSummary s = summarize(buffer);
  stats.success_rate =
      s.episodes > 0 ? static_cast<double>(s.successes) / s.episodes : 0.0;
  return stats;
}

// ---------------------------------------------------------------- trainer

nlohmann::json IterationRecord::to_json() const {
  const auto rate = [this](int count) {
    return rollout.episodes > 0
               ? static_cast<double>(count) / rollout.episodes
               : 0.0;
  };
  return {{"env_steps", env_steps},
          {"updates", updates},
          {"episodes", rollout.episodes},
          {"success_rate", rate(rollout.successes)},
          {"collision_rate", rate(rollout.collisions)},
          {"timeout_rate", rate(rollout.timeouts)},
          {"boundary_rate", rate(rollout.boundaries)},
          {"mean_reward", rollout.mean_reward},
          {"mean_episode_reward", mean_episode_reward},
          {"kl", update.approx_kl},
          {"lr", update.learning_rate},
          {"policy_loss", update.policy_loss},
          {"value_loss", update.value_loss},
          {"entropy", update.entropy},
          {"clip_fraction", update.clip_fraction},
          {"grad_norm", update.grad_norm},
          {"seconds", seconds}};
}

namespace {

constexpr const char* kTrainerKind = "pushgrid-trainer";

std::unique_ptr<VectorEnv> make_envs(const TrainConfig& config,
                                     const ScenarioSpec& scenario, int epoch) {
  return std::make_unique<VectorEnv>(
      scenario, config.num_envs,
      derive_seed(config.seed, "env", static_cast<std::uint64_t>(epoch)),
      config.workers);
}

void check_architecture(const Agent& agent, const nlohmann::json& header) {
  if (header.at("architecture") != agent.describe()) {
    throw ArchitectureMismatch(
        "checkpoint architecture " + header.at("architecture").dump() +
        " differs from " + agent.describe().dump());
  }
}

void restore_parameters(const ParamList& params, const CheckpointData& data) {
  for (const auto& [name, p] : params) {
    const Matrix& m = data.tensor("param/" + name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ArchitectureMismatch("tensor " + name + " has a different shape");
    }
    p->value = m;
    p->zero_grad();
  }
}

Matrix to_column(const std::vector<std::uint8_t>& flags) {
  Matrix m(static_cast<Eigen::Index>(flags.size()), 1);
  for (std::size_t i = 0; i < flags.size(); ++i) m(i, 0) = flags[i];
  return m;
}

}  // namespace

Trainer::Trainer(TrainConfig config, ScenarioSpec scenario)
    : Trainer(std::move(config), std::move(scenario), true) {}

Trainer::Trainer(TrainConfig config, ScenarioSpec scenario, bool initialize)
    : config_(std::move(config)), scenario_(std::move(scenario)) {
  config_.validate();
  scenario_.validate();
  Rng init = make_rng(config_.seed, "init");
  agent_ = std::make_unique<Agent>(network_spec(config_.extractor, scenario_),
                                   init);
  optimizer_ = Adam(agent_->parameters(), AdamConfig{config_.lr_init});
  envs_ = make_envs(config_, scenario_, 0);
  cursor_ = RolloutCursor::fresh(config_.num_envs);
  episode_returns_ = Eigen::VectorXd::Zero(config_.num_envs);
  pool_ = std::make_unique<WorkerPool>(config_.workers);
  policy_rng_ = make_rng(config_.seed, "policy");
  shuffle_rng_ = make_rng(config_.seed, "minibatch");
  if (initialize) envs_->reset_all();
}

void Trainer::switch_scenario(const ScenarioSpec& scenario) {
  scenario.validate();
  if (scenario.grid_rows != scenario_.grid_rows ||
      scenario.grid_cols != scenario_.grid_cols) {
    throw ArchitectureMismatch("scenario grid " +
                               std::to_string(scenario.grid_rows) + "x" +
                               std::to_string(scenario.grid_cols) +
                               " differs from the trained network's grid");
  }
  scenario_ = scenario;
  ++scenario_epoch_;
  envs_ = make_envs(config_, scenario_, scenario_epoch_);
  envs_->reset_all();
  cursor_ = RolloutCursor::fresh(config_.num_envs);
  episode_returns_.setZero();
}

IterationRecord Trainer::iterate() {
  const auto started = std::chrono::steady_clock::now();
  RolloutBuffer buffer = collect_rollout(*agent_, *envs_, cursor_,
                                         config_.rollout_length, policy_rng_,
                                         config_.discount);
  compute_advantages(buffer, config_.discount, config_.gae_lambda);
  normalize_advantages(buffer.advantages);

  IterationRecord rec;
  rec.rollout = summarize(buffer);
  double finished = 0.0;
  int finished_count = 0;
  for (int t = 0; t < buffer.length; ++t) {
    for (int e = 0; e < buffer.num_envs; ++e) {
      const int k = buffer.index(t, e);
      episode_returns_[e] += buffer.raw_rewards[k];
      if (buffer.dones[k]) {
        finished += episode_returns_[e];
        ++finished_count;
        episode_returns_[e] = 0.0;
      }
    }
  }
  rec.mean_episode_reward =
      finished_count > 0 ? finished / finished_count : 0.0;

  rec.update = ppo_update(*agent_, optimizer_, buffer, config_, shuffle_rng_,
                          true, pool_.get());
  env_steps_ += buffer.size();
  ++updates_;
  rec.env_steps = env_steps_;
  rec.updates = updates_;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              started)
                    .count();
  return rec;
}

CheckpointData Trainer::checkpoint() const {
  CheckpointData data;
  nlohmann::json header;
  header["kind"] = kTrainerKind;
  header["config"] = config_;
  header["scenario"] = scenario_;
  header["network"] = agent_->spec();
  header["architecture"] = agent_->describe();
  header["adam"] = {{"learning_rate", optimizer_.learning_rate()},
                    {"beta1", optimizer_.config().beta1},
                    {"beta2", optimizer_.config().beta2},
                    {"epsilon", optimizer_.config().epsilon},
                    {"steps", optimizer_.steps()}};
  header["rng"] = {{"policy", serialize_rng(policy_rng_)},
                   {"minibatch", serialize_rng(shuffle_rng_)}};
  header["envs"] = envs_->snapshot();
  header["env_steps"] = env_steps_;
  header["updates"] = updates_;
  header["scenario_epoch"] = scenario_epoch_;
  data.header = std::move(header);

  const ParamList& params = optimizer_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    data.tensors.emplace_back("param/" + params[i].first, params[i].second->value);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    data.tensors.emplace_back("adam.m/" + params[i].first, optimizer_.first_moments()[i]);
    data.tensors.emplace_back("adam.v/" + params[i].first, optimizer_.second_moments()[i]);
  }
  data.tensors.emplace_back("state/policy.hidden", cursor_.state.policy.hidden);
  data.tensors.emplace_back("state/policy.cell", cursor_.state.policy.cell);
  data.tensors.emplace_back("state/value.hidden", cursor_.state.value.hidden);
  data.tensors.emplace_back("state/value.cell", cursor_.state.value.cell);
  data.tensors.emplace_back("state/starts", to_column(cursor_.starts));
  data.tensors.emplace_back("state/episode_returns",
                            Matrix(episode_returns_.transpose()));
  return data;
}

void Trainer::save(const std::filesystem::path& path) const {
  write_checkpoint(path, checkpoint());
}

Trainer Trainer::load(const std::filesystem::path& path) {
  const CheckpointData data = read_checkpoint(path);
  const nlohmann::json& h = data.header;
  if (h.value("kind", "") != kTrainerKind) {
    throw FormatError(path.string() + ": not a trainer checkpoint");
  }
  try {
    Trainer trainer(h.at("config").get<TrainConfig>(),
                    h.at("scenario").get<ScenarioSpec>(), false);
    check_architecture(*trainer.agent_, h);
    const ParamList& params = trainer.optimizer_.params();
    restore_parameters(params, data);
    for (std::size_t i = 0; i < params.size(); ++i) {
      trainer.optimizer_.first_moments()[i] =
          data.tensor("adam.m/" + params[i].first);
      trainer.optimizer_.second_moments()[i] =
          data.tensor("adam.v/" + params[i].first);
    }
    const auto& adam = h.at("adam");
    trainer.optimizer_.set_learning_rate(adam.at("learning_rate").get<double>());
    trainer.optimizer_.set_steps(adam.at("steps").get<long>());
    trainer.policy_rng_ = deserialize_rng(h.at("rng").at("policy").get<std::string>());
    trainer.shuffle_rng_ =
        deserialize_rng(h.at("rng").at("minibatch").get<std::string>());
    trainer.scenario_epoch_ = h.at("scenario_epoch").get<int>();
    trainer.envs_ = make_envs(trainer.config_, trainer.scenario_,
                              trainer.scenario_epoch_);
    trainer.envs_->load_snapshot(h.at("envs"));
    trainer.env_steps_ = h.at("env_steps").get<long>();
    trainer.updates_ = h.at("updates").get<int>();
    trainer.cursor_.state.policy = {data.tensor("state/policy.hidden"),
                                    data.tensor("state/policy.cell")};
    trainer.cursor_.state.value = {data.tensor("state/value.hidden"),
                                   data.tensor("state/value.cell")};
    const Matrix& starts = data.tensor("state/starts");
    for (Eigen::Index i = 0; i < starts.rows(); ++i) {
      trainer.cursor_.starts[i] = starts(i, 0) != 0.0 ? 1 : 0;
    }
    const Matrix& returns = data.tensor("state/episode_returns");
    trainer.episode_returns_ =
        Eigen::Map<const Eigen::VectorXd>(returns.data(), returns.size());
    return trainer;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
}

RunPaths run_paths(const std::filesystem::path& run_dir) {
  return {run_dir / "metrics.ndjson", run_dir / "checkpoints",
          run_dir / "checkpoints" / "final.ckpt"};
}

namespace {

std::string checkpoint_name(int updates) {
  std::ostringstream name;
  name << "update_" << std::setw(6) << std::setfill('0') << updates << ".ckpt";
  return name.str();
}

}  // namespace

void train(Trainer& trainer, const std::filesystem::path& run_dir,
           const ProgressFn& progress) {
  const RunPaths paths = run_paths(run_dir);
  std::filesystem::create_directories(paths.checkpoints);
  std::ofstream metrics(paths.metrics, std::ios::app);
  if (!metrics) throw Error("cannot open " + paths.metrics.string());
  const int interval = trainer.config().checkpoint_interval;
  try {
    while (trainer.env_steps() < trainer.config().max_env_steps) {
      const IterationRecord rec = trainer.iterate();
      metrics << rec.to_json().dump() << '\n';
      metrics.flush();
      if (!metrics) throw Error("cannot write " + paths.metrics.string());
      if (progress) progress(rec);
      if (trainer.updates() % interval == 0) {
        trainer.save(paths.checkpoints / checkpoint_name(trainer.updates()));
      }
    }
  } catch (const TrainingFault&) {
    trainer.save(run_dir / "fault.ckpt");
    throw;
  }
  trainer.save(paths.final_checkpoint);
}

std::filesystem::path fine_tune(const std::filesystem::path& checkpoint,
                                const ScenarioSpec& scenario, long steps,
                                const std::filesystem::path& run_dir,
                                std::optional<ExtractorKind> expected,
                                const ProgressFn& progress) {
  if (steps < 0) throw ConfigError("steps", "must be >= 0");
  const RunPaths paths = run_paths(run_dir);
  if (steps == 0) {
    const CheckpointData data = read_checkpoint(checkpoint);
    const auto kind = extractor_kind_from_string(
        data.header.at("config").at("extractor").get<std::string>());
    if (expected && *expected != kind) {
      throw ArchitectureMismatch(std::string("checkpoint extractor is ") +
                                 to_string(kind) + ", expected " +
                                 to_string(*expected));
    }
    std::filesystem::create_directories(paths.checkpoints);
    std::filesystem::copy_file(checkpoint, paths.final_checkpoint,
                               std::filesystem::copy_options::overwrite_existing);
    return paths.final_checkpoint;
  }
  Trainer trainer = Trainer::load(checkpoint);
  if (expected && *expected != trainer.config().extractor) {
    throw ArchitectureMismatch(std::string("checkpoint extractor is ") +
                               to_string(trainer.config().extractor) +
                               ", expected " + to_string(*expected));
  }
  trainer.switch_scenario(scenario);
  trainer.config().max_env_steps = trainer.env_steps() + steps;
  train(trainer, run_dir, progress);
  return paths.final_checkpoint;
}

LoadedAgent load_agent(const std::filesystem::path& checkpoint) {
  const CheckpointData data = read_checkpoint(checkpoint);
  const nlohmann::json& h = data.header;
  if (h.value("kind", "") != kTrainerKind) {
    throw FormatError(checkpoint.string() + ": not a trainer checkpoint");
  }
  LoadedAgent out;
  try {
    out.config = h.at("config").get<TrainConfig>();
    out.scenario = h.at("scenario").get<ScenarioSpec>();
    Rng init = make_rng(out.config.seed, "init");
    out.agent = std::make_unique<Agent>(h.at("network").get<NetworkSpec>(), init);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(checkpoint.string() + ": bad checkpoint header: " +
                      e.what());
  }
  check_architecture(*out.agent, h);
  restore_parameters(out.agent->parameters(), data);
  return out;
}

}  // namespace pushgrid
