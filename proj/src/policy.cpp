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

#include "pushgrid/policy.hpp"

#include <cmath>

#include "pushgrid/error.hpp"

namespace pushgrid {

Eigen::RowVectorXd state_features(const Observation& obs, const Workspace& ws) {
  const Vec2 c = ws.center();
  const double s = 2.0 / ws.diagonal();
  Eigen::RowVectorXd f(kStateFeatures);
  f << s * (obs.object_pose.x - c.x), s * (obs.object_pose.y - c.y),
      std::cos(obs.object_pose.theta), std::sin(obs.object_pose.theta),
      s * (obs.target_pose.x - c.x), s * (obs.target_pose.y - c.y),
      std::cos(obs.target_pose.theta), std::sin(obs.target_pose.theta),
      s * (obs.pusher_pos.x - c.x), s * (obs.pusher_pos.y - c.y);
  return f;
}

Matrix state_features(std::span<const Observation> obs, const Workspace& ws) {
  Matrix m(static_cast<Eigen::Index>(obs.size()), kStateFeatures);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = state_features(obs[i], ws);
  }
  return m;
}

ExtractorInput extractor_input(const Observation& obs) {
  return {obs.patches, obs.grid, obs.object_pose.position(),
          obs.target_pose.position()};
}

std::vector<ExtractorInput> extractor_inputs(std::span<const Observation> obs) {
  std::vector<ExtractorInput> out;
  out.reserve(obs.size());
  for (const Observation& o : obs) out.push_back(extractor_input(o));
  return out;
}

RecurrentNet::RecurrentNet(const NetworkSpec& spec, int outputs,
                           double output_gain, Rng& rng)
    : extractor_(make_extractor(spec.extractor, spec.grid, rng)),
      state_mlp_(kStateFeatures, {kStateEmbedding}, rng),
      lstm_(kFeatureSize + kStateEmbedding, kLstmSize, rng),
      head_(kLstmSize, {kHeadHidden, outputs}, rng, true, output_gain),
      outputs_(outputs) {}

Var RecurrentNet::embed_state(Tape& tape, Var state) {
  return state_mlp_.forward(tape, state);
}

LstmVars RecurrentNet::recur_embedded(Tape& tape, Var grid_features,
                                      Var state_embedding, LstmVars memory) {
  const Var parts[] = {grid_features, state_embedding};
  return lstm_.step(tape, ad::concat_cols(parts), memory);
}

LstmVars RecurrentNet::recur(Tape& tape, Var grid_features, Var state,
                             LstmVars memory) {
  return recur_embedded(tape, grid_features, embed_state(tape, state), memory);
}

Var RecurrentNet::head(Tape& tape, Var hidden) {
  return head_.forward(tape, hidden);
}

void RecurrentNet::collect(ParamList& out, const std::string& prefix) {
  extractor_->collect(out, prefix + ".extractor");
  state_mlp_.collect(out, prefix + ".state");
  lstm_.collect(out, prefix + ".lstm");
  head_.collect(out, prefix + ".head");
}

nlohmann::json RecurrentNet::describe() const {
  return {{"extractor", extractor_->describe()},
          {"state", {kStateFeatures, kStateEmbedding}},
          {"lstm", kLstmSize},
          {"head", {kHeadHidden, outputs_}}};
}

void RecurrentState::reset_rows(const std::vector<std::uint8_t>& starts) {
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!starts[i]) continue;
    const auto r = static_cast<Eigen::Index>(i);
    policy.hidden.row(r).setZero();
    policy.cell.row(r).setZero();
    value.hidden.row(r).setZero();
    value.cell.row(r).setZero();
  }
}

Agent::Agent(const NetworkSpec& spec, Rng& rng)
    : spec_(spec),
      policy_(spec, kLogitCount, 0.01, rng),
      value_(spec, 1, 1.0, rng) {}

ParamList Agent::parameters() {
  ParamList out;
  policy_.collect(out, "policy");
  value_.collect(out, "value");
  return out;
}

nlohmann::json Agent::describe() const {
  return {{"policy", policy_.describe()}, {"value", value_.describe()}};
}

namespace {

std::pair<Matrix, LstmState> net_step(RecurrentNet& net,
                                      std::span<const ExtractorInput> inputs,
                                      const Matrix& state,
                                      const LstmState& memory) {
  Tape tape;
  Var features = net.extract(tape, inputs);
  LstmVars next = net.recur(tape, features, tape.constant(state),
                            {tape.constant(memory.hidden),
                             tape.constant(memory.cell)});
  Matrix out = net.head(tape, next.hidden).value();
  return {std::move(out), LstmState{next.hidden.value(), next.cell.value()}};
}

}  // namespace

Agent::StepOutput Agent::step(std::span<const Observation> obs,
                              const RecurrentState& state) {
  const std::vector<ExtractorInput> inputs = extractor_inputs(obs);
  const Matrix s = state_features(obs, spec_.workspace);
  StepOutput out;
  auto [logits, pmem] = net_step(policy_, inputs, s, state.policy);
  auto [values, vmem] = net_step(value_, inputs, s, state.value);
  out.logits = std::move(logits);
  out.values = Eigen::Map<const Eigen::VectorXd>(values.data(), values.rows());
  out.next = {std::move(pmem), std::move(vmem)};
  return out;
}

Matrix Agent::policy_step(std::span<const Observation> obs, LstmState& state) {
  auto [logits, mem] = net_step(policy_, extractor_inputs(obs),
                                state_features(obs, spec_.workspace), state);
  state = std::move(mem);
  return logits;
}

Eigen::VectorXd Agent::value_of(std::span<const Observation> obs,
                                const LstmState& value_state) {
  auto [values, mem] = net_step(value_, extractor_inputs(obs),
                                state_features(obs, spec_.workspace),
                                value_state);
  return Eigen::Map<const Eigen::VectorXd>(values.data(), values.rows());
}

}  // namespace pushgrid
