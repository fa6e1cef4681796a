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

#include "pushgrid/layers.hpp"

#include <cmath>

#include "pushgrid/error.hpp"

namespace pushgrid {

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& [name, p] : params) n += static_cast<std::size_t>(p->size());
  return n;
}

void zero_grads(const ParamList& params) {
  for (const auto& [name, p] : params) p->zero_grad();
}

Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  const Eigen::Index n = tall ? rows : cols;
  const Eigen::Index m = tall ? cols : rows;
  Eigen::MatrixXd a(n, m);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  Matrix out = tall ? Matrix(q) : Matrix(q.transpose());
  return gain * out;
}

Linear::Linear(int in, int out, double gain, Rng& rng)
    : weight_(orthogonal(in, out, gain, rng)), bias_(Matrix::Zero(1, out)) {}

Var Linear::forward(Tape& tape, Var x) {
  return ad::linear(x, tape.param(weight_), tape.param(bias_));
}

Matrix Linear::infer(const Matrix& x) const {
  Matrix y = x * weight_.value;
  y.rowwise() += bias_.value.row(0);
  return y;
}

void Linear::collect(ParamList& out, const std::string& prefix) {
  out.emplace_back(prefix + ".weight", &weight_);
  out.emplace_back(prefix + ".bias", &bias_);
}

Mlp::Mlp(int in, const std::vector<int>& sizes, Rng& rng, bool linear_output,
         double output_gain)
    : linear_output_(linear_output) {
  if (sizes.empty()) throw ShapeMismatch("an MLP needs at least one layer");
  int width = in;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const bool last = i + 1 == sizes.size();
    layers_.emplace_back(width, sizes[i], last ? output_gain : std::sqrt(2.0),
                         rng);
    width = sizes[i];
  }
}

Var Mlp::forward(Tape& tape, Var x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(tape, x);
    if (i + 1 < layers_.size() || !linear_output_) x = ad::tanh(x);
  }
  return x;
}

void Mlp::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out, prefix + "." + std::to_string(i));
  }
}

Lstm::Lstm(int in, int hidden, Rng& rng)
    : input_weight_(orthogonal(in, 4 * hidden, 1.0, rng)),
      hidden_weight_(orthogonal(hidden, 4 * hidden, 1.0, rng)),
      bias_(Matrix::Zero(1, 4 * hidden)) {}

LstmVars Lstm::step(Tape& tape, Var x, LstmVars state) {
  const Eigen::Index h = hidden_size();
  if (x.cols() != in_features() || state.hidden.cols() != h ||
      state.cell.cols() != h || x.rows() != state.hidden.rows()) {
    throw ShapeMismatch("lstm step: input or state shape mismatch");
  }
  Var z = ad::add(ad::linear(x, tape.param(input_weight_), tape.param(bias_)),
                  ad::matmul(state.hidden, tape.param(hidden_weight_)));
  Var in_gate = ad::sigmoid(ad::slice_cols(z, 0, h));
  Var forget = ad::sigmoid(ad::slice_cols(z, h, h));
  Var candidate = ad::tanh(ad::slice_cols(z, 2 * h, h));
  Var out_gate = ad::sigmoid(ad::slice_cols(z, 3 * h, h));
  Var cell = ad::add(ad::mul(forget, state.cell), ad::mul(in_gate, candidate));
  Var hidden = ad::mul(out_gate, ad::tanh(cell));
  return {hidden, cell};
}

void Lstm::collect(ParamList& out, const std::string& prefix) {
  out.emplace_back(prefix + ".input_weight", &input_weight_);
  out.emplace_back(prefix + ".hidden_weight", &hidden_weight_);
  out.emplace_back(prefix + ".bias", &bias_);
}

Conv2d::Conv2d(const ad::ConvShape& shape, int out_channels, double gain,
               Rng& rng)
    : shape_(shape),
      weight_(orthogonal(static_cast<Eigen::Index>(shape.in_channels) *
                             shape.kernel * shape.kernel,
                         out_channels, gain, rng)),
      bias_(Matrix::Zero(1, out_channels)) {}

Var Conv2d::forward(Tape& tape, Var x) {
  return ad::conv2d(x, tape.param(weight_), tape.param(bias_), shape_);
}

void Conv2d::collect(ParamList& out, const std::string& prefix) {
  out.emplace_back(prefix + ".weight", &weight_);
  out.emplace_back(prefix + ".bias", &bias_);
}

}  // namespace pushgrid
