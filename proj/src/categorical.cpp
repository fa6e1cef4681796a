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

#include "pushgrid/categorical.hpp"

#include <algorithm>
#include <cmath>

#include "pushgrid/error.hpp"

namespace pushgrid {
namespace {

using Head = std::array<double, kActionBins>;

Head log_softmax(const Head& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - m);
  const double lse = m + std::log(total);
  Head out;
  for (int i = 0; i < kActionBins; ++i) out[i] = logits[i] - lse;
  return out;
}

Head softmax(const Head& logits) {
  Head p = log_softmax(logits);
  for (double& v : p) v = std::exp(v);
  return p;
}

int draw(const Head& logits, Rng& rng) {
  const Head p = softmax(logits);
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  for (int i = 0; i < kActionBins; ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  // Rounding left a sliver above the last cumulative sum.
  for (int i = kActionBins - 1; i >= 0; --i) {
    if (p[i] > 0.0) return i;
  }
  return kActionBins - 1;
}

double head_entropy(const Head& logits) {
  const Head lp = log_softmax(logits);
  double h = 0.0;
  for (double l : lp) {
    const double p = std::exp(l);
    if (p > 0.0) h -= p * l;
  }
  return h;
}

int argmax(const Head& logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                          logits.begin());
}

}  // namespace

CategoricalPair CategoricalPair::from_row(std::span<const double> logits) {
  if (logits.size() != static_cast<std::size_t>(kLogitCount)) {
    throw ShapeMismatch("expected 22 logits, got " +
                        std::to_string(logits.size()));
  }
  CategoricalPair d;
  std::copy_n(logits.begin(), kActionBins, d.logits_x.begin());
  std::copy_n(logits.begin() + kActionBins, kActionBins, d.logits_y.begin());
  return d;
}

HeadProbabilities CategoricalPair::probabilities_x() const {
  return softmax(logits_x);
}

HeadProbabilities CategoricalPair::probabilities_y() const {
  return softmax(logits_y);
}

SampledAction sample_action(const CategoricalPair& dist, Rng& rng) {
  SampledAction s;
  s.action.bin_x = draw(dist.logits_x, rng);
  s.action.bin_y = draw(dist.logits_y, rng);
  s.log_prob = log_prob(dist, s.action);
  return s;
}

double log_prob(const CategoricalPair& dist, const Action& action) {
  decode_action(action);  // range check
  return log_softmax(dist.logits_x)[action.bin_x] +
         log_softmax(dist.logits_y)[action.bin_y];
}

double entropy(const CategoricalPair& dist) {
  return head_entropy(dist.logits_x) + head_entropy(dist.logits_y);
}

Action mode(const CategoricalPair& dist) {
  return {argmax(dist.logits_x), argmax(dist.logits_y)};
}

Var action_log_prob(Var logits, const std::vector<Action>& actions) {
  if (logits.cols() != kLogitCount ||
      static_cast<Eigen::Index>(actions.size()) != logits.rows()) {
    throw ShapeMismatch("action_log_prob: logits/actions shape mismatch");
  }
  std::vector<int> bx, by;
  bx.reserve(actions.size());
  by.reserve(actions.size());
  for (const Action& a : actions) {
    decode_action(a);
    bx.push_back(a.bin_x);
    by.push_back(a.bin_y);
  }
  Var lx = ad::log_softmax_rows(ad::slice_cols(logits, 0, kActionBins));
  Var ly = ad::log_softmax_rows(ad::slice_cols(logits, kActionBins, kActionBins));
  return ad::add(ad::pick(lx, std::move(bx)), ad::pick(ly, std::move(by)));
}

Var action_entropy(Var logits) {
  Var total;
  for (int head = 0; head < 2; ++head) {
    Var lp = ad::log_softmax_rows(
        ad::slice_cols(logits, head * kActionBins, kActionBins));
    Var h = ad::mul(ad::exp(lp), lp);
    Var ones = logits.tape()->constant(Matrix::Ones(kActionBins, 1));
    Var neg = ad::scale(ad::matmul(h, ones), -1.0);
    total = total.valid() ? ad::add(total, neg) : neg;
  }
  return total;
}

}  // namespace pushgrid
