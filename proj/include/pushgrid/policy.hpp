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

#ifndef PUSHGRID_POLICY_HPP_
#define PUSHGRID_POLICY_HPP_

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pushgrid/categorical.hpp"
#include "pushgrid/env.hpp"
#include "pushgrid/extractors.hpp"
#include "pushgrid/layers.hpp"

namespace pushgrid {

inline constexpr int kStateFeatures = 10;
inline constexpr int kStateEmbedding = 64;
inline constexpr int kLstmSize = 256;
inline constexpr int kHeadHidden = 128;

struct NetworkSpec {
  ExtractorKind extractor = ExtractorKind::kAttention;
  GridShape grid;
  Workspace workspace{0.7, 0.5, {}};  // for input normalization
};

// Object pose, target pose (angles as cos/sin) and pusher position, with
// positions centered on the workspace and scaled by its half diagonal.
Eigen::RowVectorXd state_features(const Observation& obs, const Workspace& ws);
Matrix state_features(std::span<const Observation> obs, const Workspace& ws);
ExtractorInput extractor_input(const Observation& obs);
std::vector<ExtractorInput> extractor_inputs(std::span<const Observation> obs);

// Grid extractor (64) and state MLP (64) feed an LSTM (256), then an MLP
// (128) and a linear output layer. The policy has 22 outputs (two 11-bin
// heads), the value network 1.
class RecurrentNet {
 public:
  RecurrentNet(const NetworkSpec& spec, int outputs, double output_gain,
               Rng& rng);

  Extractor& extractor() { return *extractor_; }
  Var extract(Tape& tape, std::span<const ExtractorInput> batch) {
    return extractor_->forward(tape, batch);
  }
  // One recurrent step from precomputed grid features (B x 64) and raw
  // state features (B x 10).
  LstmVars recur(Tape& tape, Var grid_features, Var state, LstmVars memory);
  // Applies the state MLP to many rows at once (B x 10 -> B x 64).
  Var embed_state(Tape& tape, Var state);
  LstmVars recur_embedded(Tape& tape, Var grid_features, Var state_embedding,
                          LstmVars memory);
  Var head(Tape& tape, Var hidden);

  void collect(ParamList& out, const std::string& prefix);
  nlohmann::json describe() const;
  int outputs() const { return outputs_; }

 private:
  std::unique_ptr<Extractor> extractor_;
  Mlp state_mlp_;
  Lstm lstm_;
  Mlp head_;
  int outputs_;
};

struct RecurrentState {
  LstmState policy;
  LstmState value;

  static RecurrentState zeros(Eigen::Index batch) {
    return {LstmState::zeros(batch, kLstmSize), LstmState::zeros(batch, kLstmSize)};
  }
  // Zeroes the rows of environments that start a new episode.
  void reset_rows(const std::vector<std::uint8_t>& starts);
};

// Separate policy and value networks with identical topology.
class Agent {
 public:
  Agent(const NetworkSpec& spec, Rng& rng);

  RecurrentNet& policy() { return policy_; }
  RecurrentNet& value() { return value_; }
  const NetworkSpec& spec() const { return spec_; }
  // Policy parameters first, then value parameters.
  ParamList parameters();
  nlohmann::json describe() const;

  struct StepOutput {
    Matrix logits;          // B x 22
    Eigen::VectorXd values; // B
    RecurrentState next;
  };
  // Inference for one time step of a batch; no gradients are kept.
  StepOutput step(std::span<const Observation> obs, const RecurrentState& state);
  // Policy half only (evaluation).
  Matrix policy_step(std::span<const Observation> obs, LstmState& state);
  // Value of observations given the value network memory before them.
  Eigen::VectorXd value_of(std::span<const Observation> obs,
                           const LstmState& value_state);

 private:
  NetworkSpec spec_;
  RecurrentNet policy_;
  RecurrentNet value_;
};

}  // namespace pushgrid

#endif  // PUSHGRID_POLICY_HPP_
