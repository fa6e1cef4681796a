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

#ifndef PUSHGRID_LAYERS_HPP_
#define PUSHGRID_LAYERS_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pushgrid/autodiff.hpp"
#include "pushgrid/rng.hpp"

namespace pushgrid {

// Named references into a model, in a fixed order (checkpoint layout).
using ParamList = std::vector<std::pair<std::string, Parameter*>>;

std::size_t count_parameters(const ParamList& params);
void zero_grads(const ParamList& params);

// Orthogonal rows x cols matrix scaled by gain.
Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, double gain, Rng& rng);

  Var forward(Tape& tape, Var x);
  Matrix infer(const Matrix& x) const;
  void collect(ParamList& out, const std::string& prefix);
  int in_features() const { return static_cast<int>(weight_.value.rows()); }
  int out_features() const { return static_cast<int>(weight_.value.cols()); }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weight_;  // in x out
  Parameter bias_;    // 1 x out
};

// Stack of linear layers with tanh between them. The last layer is tanh too
// unless `linear_output`.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in, const std::vector<int>& sizes, Rng& rng, bool linear_output = false,
      double output_gain = std::sqrt(2.0));

  Var forward(Tape& tape, Var x);
  void collect(ParamList& out, const std::string& prefix);
  int in_features() const { return layers_.front().in_features(); }
  int out_features() const { return layers_.back().out_features(); }
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
  bool linear_output_ = false;
};

struct LstmState {
  Matrix hidden;  // batch x H
  Matrix cell;

  static LstmState zeros(Eigen::Index batch, Eigen::Index hidden_size) {
    return {Matrix::Zero(batch, hidden_size), Matrix::Zero(batch, hidden_size)};
  }
};

struct LstmVars {
  Var hidden;
  Var cell;
};

// Gates ordered input, forget, candidate, output.
class Lstm {
 public:
  Lstm() = default;
  Lstm(int in, int hidden, Rng& rng);

  LstmVars step(Tape& tape, Var x, LstmVars state);
  void collect(ParamList& out, const std::string& prefix);
  int hidden_size() const { return static_cast<int>(hidden_weight_.value.rows()); }
  int in_features() const { return static_cast<int>(input_weight_.value.rows()); }
  Parameter& bias() { return bias_; }

 private:
  Parameter input_weight_;   // in x 4H
  Parameter hidden_weight_;  // H x 4H
  Parameter bias_;           // 1 x 4H
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const ad::ConvShape& shape, int out_channels, double gain, Rng& rng);

  Var forward(Tape& tape, Var x);
  void collect(ParamList& out, const std::string& prefix);
  const ad::ConvShape& shape() const { return shape_; }
  int out_channels() const { return static_cast<int>(weight_.value.cols()); }
  int out_size() const {
    return out_channels() * shape_.out_height() * shape_.out_width();
  }

 private:
  ad::ConvShape shape_;
  Parameter weight_;  // (C k k) x O
  Parameter bias_;
};

}  // namespace pushgrid

#endif  // PUSHGRID_LAYERS_HPP_
