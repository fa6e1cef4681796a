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

#ifndef PUSHGRID_AUTODIFF_HPP_
#define PUSHGRID_AUTODIFF_HPP_

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

namespace pushgrid {

// Row-major so that one row is one sample and reshapes are free.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v)
      : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Per-parameter gradient accumulator used instead of Parameter::grad, so
// independent tapes can run concurrently and be merged in a fixed order.
using GradientSink = std::unordered_map<Parameter*, Matrix>;

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
// sweep visits every consumer before its inputs.
class Tape {
 public:
  using Backward =
      std::function<void(Tape&, int self, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Differentiable input; read its gradient with grad() after backward.
  Var leaf(Matrix value);
  // Reads p.value without copying; backward adds into p.grad, or into the
  // sink when one is set.
  Var param(Parameter& p);
  void set_gradient_sink(GradientSink* sink) { sink_ = sink; }

  // Seeds a 1x1 output with 1.
  void backward(Var output);
  void backward(Var output, const Matrix& seed);

  // Zero matrix of the right shape when no gradient reached v.
  Matrix grad(Var v) const;

  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  void accumulate(int id, const Matrix& g);
  Var record(Matrix value, bool requires_grad, Backward backward);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  GradientSink* sink_ = nullptr;
};

namespace ad {

Var matmul(Var a, Var b);
// x W + b with b a 1 x out row broadcast over rows.
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var minimum(Var a, Var b);
Var clamp(Var a, double lo, double hi);
// Multiplies row r by the constant s[r].
Var scale_rows(Var a, const Eigen::VectorXd& s);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var a, std::vector<int> index);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
// Row r of the result is the entry a(r, col[r]).
Var pick(Var a, std::vector<int> col);
// w is B x P, f is (B*P) x D; out(b) = sum_p w(b,p) f(b*P + p).
Var weighted_group_sum(Var w, Var f);

struct ConvShape {
  int in_channels = 1;
  int height = 0;
  int width = 0;
  int kernel = 5;
  int stride = 1;
  int out_height() const { return (height - kernel) / stride + 1; }
  int out_width() const { return (width - kernel) / stride + 1; }
};
// x: B x (C*H*W) channel-major; w: (C*k*k) x O; b: 1 x O.
// Result: B x (O*H'*W'), valid padding.
Var conv2d(Var x, Var w, Var b, const ConvShape& shape);

}  // namespace ad
}  // namespace pushgrid

#endif  // PUSHGRID_AUTODIFF_HPP_
