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

#ifndef PUSHGRID_CATEGORICAL_HPP_
#define PUSHGRID_CATEGORICAL_HPP_

#include <array>
#include <span>
#include <vector>

#include "pushgrid/autodiff.hpp"
#include "pushgrid/env.hpp"
#include "pushgrid/rng.hpp"

namespace pushgrid {

// Two independent 11-way heads: columns [0, 11) drive x, [11, 22) drive y.
inline constexpr int kLogitCount = 2 * kActionBins;

using HeadProbabilities = std::array<double, kActionBins>;

struct CategoricalPair {
  std::array<double, kActionBins> logits_x{};
  std::array<double, kActionBins> logits_y{};

  static CategoricalPair from_row(std::span<const double> logits);
  HeadProbabilities probabilities_x() const;
  HeadProbabilities probabilities_y() const;
};

struct SampledAction {
  Action action;
  double log_prob = 0.0;
};

SampledAction sample_action(const CategoricalPair& dist, Rng& rng);
double log_prob(const CategoricalPair& dist, const Action& action);
double entropy(const CategoricalPair& dist);
// Per-axis argmax; ties go to the lowest bin.
Action mode(const CategoricalPair& dist);

// Differentiable counterparts over a batch of logit rows (B x 22); both
// return B x 1.
Var action_log_prob(Var logits, const std::vector<Action>& actions);
Var action_entropy(Var logits);

}  // namespace pushgrid

#endif  // PUSHGRID_CATEGORICAL_HPP_
