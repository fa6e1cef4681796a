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
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pushgrid/error.hpp"
#include "pushgrid/ppo.hpp"

namespace pushgrid {
namespace {

namespace fs = std::filesystem;

// Small, fast setting: few envs, short rollouts, one epoch.
TrainConfig tiny_config(std::uint64_t seed = 3) {
  TrainConfig c;
  c.num_envs = 3;
  c.rollout_length = 6;
  c.update_epochs = 2;
  c.minibatches = 2;
  c.max_env_steps = 36;
  c.seed = seed;
  c.checkpoint_interval = 1;
  c.feature_chunk = 5;
  return c;
}

// Short episodes so that rollouts cross episode boundaries.
ScenarioSpec short_scenario(int max_steps = 4) {
  ScenarioSpec s = named_scenario("training", Phase::kTraining);
  s.max_steps = max_steps;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pushgrid_test_ppo_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

double max_param_diff(const ParamList& a, const ParamList& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, (a[i].second->value - b[i].second->value).cwiseAbs().maxCoeff());
  }
  return d;
}

struct Fixture {
  TrainConfig config = tiny_config();
  ScenarioSpec scenario = short_scenario();
  Trainer trainer{config, scenario};

  RolloutBuffer rollout() {
    Rng rng = make_rng(config.seed, "policy");
    RolloutCursor cursor = RolloutCursor::fresh(config.num_envs);
    RolloutBuffer b = collect_rollout(trainer.agent(), trainer.envs(), cursor,
                                      config.rollout_length, rng,
                                      config.discount);
    compute_advantages(b, config.discount, config.gae_lambda);
    normalize_advantages(b.advantages);
    return b;
  }
};

std::vector<int> all_envs(const RolloutBuffer& b) {
  std::vector<int> e(static_cast<std::size_t>(b.num_envs));
  std::iota(e.begin(), e.end(), 0);
  return e;
}

TEST_CASE("config round-trips through JSON and rejects unknown keys") {
  TrainConfig c = tiny_config(42);
  c.extractor = ExtractorKind::kCnn;
  const nlohmann::json j = c;
  const TrainConfig back = j.get<TrainConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.batch_size() == 18);

  nlohmann::json bad = j;
  bad["learning_rate"] = 1.0;
  try {
    (void)bad.get<TrainConfig>();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "learning_rate");
  }
  bad = j;
  bad["num_envs"] = "many";
  CHECK_THROWS_AS((void)bad.get<TrainConfig>(), ConfigError);
  c.clip_epsilon = 0.0;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "clip_epsilon");
  }
}

TEST_CASE("defaults follow the training table") {
  const TrainConfig c;
  CHECK(c.rollout_length == 120);
  CHECK(c.update_epochs == 5);
  CHECK(c.clip_epsilon == 0.2);
  CHECK(c.discount == 0.99);
  CHECK(c.gae_lambda == 0.95);
  CHECK(c.entropy_coef == 0.0);
  CHECK(c.value_coef == 0.5);
  CHECK(c.kl_target == 0.01);
  CHECK(c.minibatches == 4);
  CHECK(c.max_grad_norm == 1.0);
}

TEST_CASE("bootstrap_timeout substitutes the discounted value") {
  CHECK(bootstrap_timeout(0.1, 10.0, 0.99) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(bootstrap_timeout(0.1, 0.0, 0.99) == 0.1);
}

TEST_CASE("compute_gae small cases") {
  const std::vector<double> r{1.0}, v{0.0};
  const std::vector<std::uint8_t> d{1};
  const Gae g = compute_gae(r, v, d, 123.0, 0.99, 0.95);
  CHECK(g.advantages[0] == 1.0);
  CHECK(g.returns[0] == 1.0);

  // lambda = 0 reduces to the one-step TD error.
  const std::vector<double> r3{0.5, -0.2, 0.3}, v3{1.0, 2.0, -1.0};
  const std::vector<std::uint8_t> d3{0, 1, 0};
  const double boot = 0.7, gamma = 0.9;
  const Gae td = compute_gae(r3, v3, d3, boot, gamma, 0.0);
  CHECK(td.advantages[0] == doctest::Approx(0.5 + gamma * 2.0 - 1.0).epsilon(1e-15));
  CHECK(td.advantages[1] == doctest::Approx(-0.2 - 2.0).epsilon(1e-15));
  CHECK(td.advantages[2] == doctest::Approx(0.3 + gamma * boot + 1.0).epsilon(1e-15));
  CHECK_THROWS_AS(compute_gae(r3, v, d3, 0.0), ShapeMismatch);
}

TEST_CASE("compute_gae matches brute-force summation on random sequences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution done(0.08);
  double worst = 0.0;
  for (int instance = 0; instance < 100; ++instance) {
    std::vector<double> r(50), v(50);
    std::vector<std::uint8_t> d(50);
    for (int t = 0; t < 50; ++t) {
      r[t] = g(rng);
      v[t] = 3.0 * g(rng);
      d[t] = done(rng);
    }
    const double boot = g(rng);
    const Gae gae = compute_gae(r, v, d, boot, 0.99, 0.95);
    const auto oracle = oracle::brute_force_gae(r, v, d, boot, 0.99, 0.95);
    for (int t = 0; t < 50; ++t) {
      worst = std::max(worst, std::abs(gae.advantages[t] - oracle[t]));
      CHECK(gae.returns[t] == doctest::Approx(gae.advantages[t] + v[t]).epsilon(1e-14));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("normalize_advantages gives zero mean and unit std") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(5.0, 7.0);
  Eigen::VectorXd a(1000);
  for (auto& x : a) x = g(rng);
  normalize_advantages(a);
  const double mean = a.mean();
  const double std = std::sqrt((a.array() - mean).square().mean());
  CHECK(std::abs(mean) < 1e-10);
  CHECK(std::abs(std - 1.0) < 1e-10);

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(5, 2.5);
  normalize_advantages(flat);
  CHECK(flat.isZero(0.0));
}

TEST_CASE("adapt_lr follows the KL schedule") {
  CHECK(adapt_lr(3e-4, 0.05) == doctest::Approx(2e-4).epsilon(1e-14));
  CHECK(adapt_lr(3e-4, 0.001) == doctest::Approx(4.5e-4).epsilon(1e-14));
  CHECK(adapt_lr(3e-4, 0.01) == 3e-4);
  CHECK(adapt_lr(3e-4, 0.02) == 3e-4);
  CHECK(adapt_lr(3e-4, 0.005) == 3e-4);
  CHECK(adapt_lr(1e-6, 1.0) == 1e-6);
  CHECK(adapt_lr(9e-3, 0.0) == 1e-2);
}

TEST_CASE("collect_rollout fills one entry per env and step") {
  TrainConfig c = tiny_config();
  c.num_envs = 2;
  VectorEnv envs(short_scenario(), 2, 1);
  envs.reset_all();
  Rng init(1), rng(2);
  Agent agent(network_spec(c.extractor, short_scenario()), init);
  RolloutCursor cursor = RolloutCursor::fresh(2);
  const RolloutBuffer b = collect_rollout(agent, envs, cursor, 3, rng, 0.99);
  CHECK(b.size() == 6);
  CHECK(b.observations.size() == 6);
  CHECK(b.starts[0] == 1);
  CHECK(b.starts[1] == 1);
  CHECK(b.starts[2] == 0);
  for (const Action& a : b.actions) {
    CHECK(a.bin_x >= 0);
    CHECK(a.bin_x < kActionBins);
  }
  CHECK(b.log_probs.allFinite());
  CHECK(b.last_values.size() == 2);
}

TEST_CASE("rollouts cross episode boundaries with zeroed memory") {
  Fixture f;
  const RolloutBuffer b = f.rollout();
  // Episodes last 4 steps unless they end earlier; every done is followed
  // by a start flag and every start after step 0 follows a done.
  int timeouts = 0;
  for (int t = 1; t < b.length; ++t) {
    for (int e = 0; e < b.num_envs; ++e) {
      CHECK(b.starts[b.index(t, e)] == b.dones[b.index(t - 1, e)]);
    }
  }
  for (int k = 0; k < b.size(); ++k) {
    if (b.terminations[k] == Termination::kTimeout) {
      ++timeouts;
      CHECK(b.rewards[k] != b.raw_rewards[k]);
    } else {
      CHECK(b.rewards[k] == b.raw_rewards[k]);
    }
  }
  CHECK(timeouts > 0);
}

TEST_CASE("stored log-probs match a replay under the unchanged policy") {
  Fixture f;
  const RolloutBuffer b = f.rollout();
  const auto envs = all_envs(b);
  const MinibatchResult r =
      evaluate_minibatch(f.trainer.agent(), b, envs, LossOptions{}, false);
  double worst_lp = 0.0, worst_v = 0.0;
  for (int t = 0; t < b.length; ++t) {
    for (int e = 0; e < b.num_envs; ++e) {
      const int row = t * b.num_envs + e;
      worst_lp = std::max(worst_lp, std::abs(r.log_probs[row] - b.log_probs[b.index(t, e)]));
      worst_v = std::max(worst_v, std::abs(r.values[row] - b.values[b.index(t, e)]));
    }
  }
  CHECK(worst_lp <= 1e-12);
  CHECK(worst_v <= 1e-12);
  CHECK(r.max_ratio_deviation <= 1e-12);
  CHECK(r.clip_fraction == 0.0);
}

TEST_CASE("replaying one env alone matches the full batch") {
  Fixture f;
  const RolloutBuffer b = f.rollout();
  const auto all = all_envs(b);
  const MinibatchResult full =
      evaluate_minibatch(f.trainer.agent(), b, all, LossOptions{}, false);
  const int env = 1;
  const MinibatchResult one = evaluate_minibatch(
      f.trainer.agent(), b, std::span<const int>(&env, 1), LossOptions{}, false);
  for (int t = 0; t < b.length; ++t) {
    CHECK(std::abs(one.log_probs[t] - full.log_probs[t * b.num_envs + env]) < 1e-12);
  }
}

TEST_CASE("first minibatch of the first epoch sees ratio one") {
  Fixture f;
  const RolloutBuffer b = f.rollout();
  Rng shuffle(5);
  const UpdateStats s =
      ppo_update(f.trainer.agent(), f.trainer.optimizer(), b, f.config, shuffle);
  REQUIRE(s.minibatches.size() == 4);
  CHECK(s.minibatches[0].max_ratio_deviation <= 1e-12);
  CHECK(s.minibatches[0].clip_fraction == 0.0);
  CHECK(std::abs(s.minibatches[0].approx_kl) <= 1e-12);
  CHECK(std::isfinite(s.policy_loss));
  CHECK(std::isfinite(s.value_loss));
  CHECK(s.learning_rate > 0.0);
}

TEST_CASE("zero advantages leave the policy network unchanged") {
  Fixture f;
  RolloutBuffer b = f.rollout();
  b.advantages.setZero();
  ParamList params = f.trainer.agent().parameters();
  std::vector<Matrix> before;
  for (const auto& [name, p] : params) before.push_back(p->value);
  Rng shuffle(5);
  f.config.update_epochs = 1;
  ppo_update(f.trainer.agent(), f.trainer.optimizer(), b, f.config, shuffle);
  bool value_changed = false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const bool same = (params[i].second->value - before[i]).cwiseAbs().maxCoeff() == 0.0;
    if (params[i].first.rfind("policy.", 0) == 0) {
      CHECK_MESSAGE(same, params[i].first);
    } else if (!same) {
      value_changed = true;
    }
  }
  CHECK(value_changed);
}

TEST_CASE("one update decreases the loss on a fixed batch") {
  Fixture f;
  const RolloutBuffer b = f.rollout();
  const auto envs = all_envs(b);
  LossOptions opts;
  const double before =
      evaluate_minibatch(f.trainer.agent(), b, envs, opts, false).loss;
  TrainConfig c = f.config;
  c.update_epochs = 1;
  c.minibatches = 1;
  f.trainer.optimizer().set_learning_rate(1e-4);
  Rng shuffle(5);
  ppo_update(f.trainer.agent(), f.trainer.optimizer(), b, c, shuffle);
  const double after =
      evaluate_minibatch(f.trainer.agent(), b, envs, opts, false).loss;
  CHECK(after < before);
}

TEST_CASE("an unbounded clip range equals the unclipped surrogate") {
  Fixture a, b;
  const RolloutBuffer buf = a.rollout();
  TrainConfig c = a.config;
  c.update_epochs = 1;
  c.clip_epsilon = 1e12;
  Rng sa(5), sb(5);
  ppo_update(a.trainer.agent(), a.trainer.optimizer(), buf, c, sa, true);
  ppo_update(b.trainer.agent(), b.trainer.optimizer(), buf, c, sb, false);
  CHECK(max_param_diff(a.trainer.agent().parameters(),
                       b.trainer.agent().parameters()) == 0.0);
}

TEST_CASE("a zero entropy coefficient adds nothing to the gradient") {
  Fixture f;
  const RolloutBuffer b = f.rollout();
  const auto envs = all_envs(b);
  const ParamList params = f.trainer.agent().parameters();
  const auto gradients = [&](bool entropy_term) {
    zero_grads(params);
    LossOptions opts;
    opts.entropy_coef = 0.0;
    opts.entropy_term = entropy_term;
    evaluate_minibatch(f.trainer.agent(), b, envs, opts, true);
    std::vector<Matrix> g;
    for (const auto& [name, p] : params) g.push_back(p->grad);
    return g;
  };
  const auto with = gradients(true);
  const auto without = gradients(false);
  double worst = 0.0, total = 0.0;
  for (std::size_t i = 0; i < with.size(); ++i) {
    worst = std::max(worst, (with[i] - without[i]).cwiseAbs().maxCoeff());
    total += with[i].squaredNorm();
  }
  CHECK(worst == 0.0);
  CHECK(total > 0.0);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  const fs::path dir = scratch("roundtrip");
  Trainer a(tiny_config(), short_scenario());
  a.iterate();
  a.save(dir / "a.ckpt");
  Trainer b = Trainer::load(dir / "a.ckpt");
  b.save(dir / "b.ckpt");
  CHECK(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"));
  CHECK(b.env_steps() == a.env_steps());
  CHECK(b.optimizer().learning_rate() == a.optimizer().learning_rate());

  const IterationRecord ra = a.iterate();
  const IterationRecord rb = b.iterate();
  CHECK(max_param_diff(a.agent().parameters(), b.agent().parameters()) == 0.0);
  CHECK(ra.update.policy_loss == rb.update.policy_loss);
  CHECK(ra.update.value_loss == rb.update.value_loss);
  CHECK(ra.mean_episode_reward == rb.mean_episode_reward);
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  const fs::path dir = scratch("resume");
  Trainer straight(tiny_config(9), short_scenario());
  straight.iterate();
  straight.iterate();
  Trainer first(tiny_config(9), short_scenario());
  first.iterate();
  first.save(dir / "mid.ckpt");
  Trainer resumed = Trainer::load(dir / "mid.ckpt");
  resumed.iterate();
  CHECK(max_param_diff(straight.agent().parameters(),
                       resumed.agent().parameters()) == 0.0);
  straight.save(dir / "s.ckpt");
  resumed.save(dir / "r.ckpt");
  CHECK(file_bytes(dir / "s.ckpt") == file_bytes(dir / "r.ckpt"));
}

TEST_CASE("training results do not depend on the worker count") {
  TrainConfig serial = tiny_config(5);
  TrainConfig threaded = serial;
  threaded.workers = 3;
  Trainer a(serial, short_scenario());
  Trainer b(threaded, short_scenario());
  for (int i = 0; i < 2; ++i) {
    const IterationRecord ra = a.iterate();
    const IterationRecord rb = b.iterate();
    CHECK(ra.update.policy_loss == rb.update.policy_loss);
    CHECK(ra.update.grad_norm == rb.update.grad_norm);
  }
  CHECK(max_param_diff(a.agent().parameters(), b.agent().parameters()) == 0.0);
  CHECK(a.optimizer().learning_rate() == b.optimizer().learning_rate());
}

TEST_CASE("damaged checkpoints raise FormatError") {
  const fs::path dir = scratch("damaged");
  Trainer t(tiny_config(), short_scenario());
  t.save(dir / "ok.ckpt");
  const std::string bytes = file_bytes(dir / "ok.ckpt");
  const auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };
  CHECK_THROWS_AS(Trainer::load(write("short.ckpt", bytes.substr(0, bytes.size() / 2))),
                  FormatError);
  std::string flipped = bytes;
  flipped[flipped.size() - 100] ^= 0x01;
  CHECK_THROWS_AS(Trainer::load(write("flip.ckpt", flipped)), FormatError);
  CHECK_THROWS_AS(Trainer::load(write("magic.ckpt", "hello world")), FormatError);
  CHECK_THROWS_AS(Trainer::load(dir / "missing.ckpt"), FormatError);
}

TEST_CASE("train writes increasing metrics and checkpoints") {
  const fs::path dir = scratch("train");
  Trainer t(tiny_config(), short_scenario());
  train(t, dir);
  const RunPaths paths = run_paths(dir);
  std::ifstream metrics(paths.metrics);
  std::string line;
  long last = 0;
  int rows = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("env_steps").get<long>() > last);
    last = j.at("env_steps").get<long>();
    for (const char* key : {"success_rate", "mean_reward", "kl", "lr"}) {
      CHECK(j.contains(key));
    }
    ++rows;
  }
  CHECK(rows == 2);
  CHECK(last == 36);
  CHECK(fs::exists(paths.final_checkpoint));
  CHECK(fs::exists(paths.checkpoints / "update_000001.ckpt"));
  CHECK(fs::exists(paths.checkpoints / "update_000002.ckpt"));
}

TEST_CASE("a non-finite loss raises a training fault with a dump") {
  const fs::path dir = scratch("fault");
  Trainer t(tiny_config(), short_scenario());
  ParamList params = t.agent().parameters();
  params.back().second->value.setConstant(std::nan(""));
  CHECK_THROWS_AS(train(t, dir), TrainingFault);
  CHECK(fs::exists(dir / "fault.ckpt"));
}

TEST_CASE("fine-tuning keeps optimizer state and checks the architecture") {
  const fs::path dir = scratch("finetune");
  Trainer t(tiny_config(), short_scenario());
  t.iterate();
  t.save(dir / "base.ckpt");
  const double saved_lr = t.optimizer().learning_rate();
  CHECK(saved_lr != tiny_config().lr_init);

  const fs::path copied = fine_tune(dir / "base.ckpt", named_scenario("dual", Phase::kTraining),
                                    0, dir / "zero");
  CHECK(file_bytes(copied) == file_bytes(dir / "base.ckpt"));

  CHECK_THROWS_AS(fine_tune(dir / "base.ckpt", short_scenario(), 10, dir / "bad",
                            ExtractorKind::kCnn),
                  ArchitectureMismatch);
  CHECK_THROWS_AS(fine_tune(dir / "base.ckpt", short_scenario(), 0, dir / "bad0",
                            ExtractorKind::kMlp),
                  ArchitectureMismatch);

  Trainer resumed = Trainer::load(dir / "base.ckpt");
  CHECK(resumed.optimizer().learning_rate() == saved_lr);
  CHECK(resumed.optimizer().steps() == t.optimizer().steps());

  const fs::path tuned = fine_tune(dir / "base.ckpt", short_scenario(2), 18,
                                   dir / "tuned", ExtractorKind::kAttention);
  Trainer after = Trainer::load(tuned);
  CHECK(after.env_steps() == t.env_steps() + 18);
  CHECK(after.scenario().max_steps == 2);
  CHECK(after.optimizer().steps() == t.optimizer().steps() + 4);
}

TEST_CASE("load_agent restores the trained networks") {
  const fs::path dir = scratch("load_agent");
  Trainer t(tiny_config(), short_scenario());
  t.iterate();
  t.save(dir / "x.ckpt");
  const LoadedAgent loaded = load_agent(dir / "x.ckpt");
  CHECK(max_param_diff(t.agent().parameters(), loaded.agent->parameters()) == 0.0);
  CHECK(loaded.scenario.max_steps == 4);
}

}  // namespace
}  // namespace pushgrid
