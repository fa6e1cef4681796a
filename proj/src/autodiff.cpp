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

#include "pushgrid/autodiff.hpp"

#include <cmath>
#include <string>

#include "pushgrid/error.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pushgrid {
namespace {

// Tape temporaries are large and short-lived. Serving them from the heap
// rather than fresh mmap regions avoids a page fault per touched page.
[[maybe_unused]] const bool kHeapTuned = [] {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  return true;
}();

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Var Tape::record(Matrix value, bool requires_grad, Backward backward) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return record(std::move(value), false, {}); }

Var Tape::leaf(Matrix value) {
  return record(std::move(value), true, [](Tape&, int, const Matrix&) {});
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.requires_grad = true;
  Parameter* target = &p;
  n.backward = [target](Tape& t, int, const Matrix& g) {
    if (t.sink_ == nullptr) {
      target->grad += g;
      return;
    }
    auto [it, fresh] = t.sink_->try_emplace(target, g);
    if (!fresh) it->second += g;
  };
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var output) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw ShapeMismatch("backward without seed needs a 1x1 output");
  }
  backward(output, Matrix::Ones(1, 1));
}

void Tape::backward(Var output, const Matrix& seed) {
  if (seed.rows() != output.rows() || seed.cols() != output.cols()) {
    throw ShapeMismatch("backward seed shape differs from output");
  }
  accumulate(output.id(), seed);
  for (int i = output.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    n.backward(*this, i, n.grad);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(v.rows(), v.cols());
  return n.grad;
}

namespace ad {
namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(op) + ": " + shape_of(a.value()) +
                        " vs " + shape_of(b.value()));
  }
}

bool any_grad(Var a) { return a.tape()->requires_grad(a.id()); }
bool any_grad(Var a, Var b) { return any_grad(a) || any_grad(b); }

template <typename F>
Var unary(Var a, Matrix value, F local_grad) {
  const int ia = a.id();
  return a.tape()->record(
      std::move(value), any_grad(a),
      [ia, local_grad](Tape& t, int self, const Matrix& g) {
        t.accumulate(ia, local_grad(t.value(ia), t.value(self), g));
      });
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matmul: " + shape_of(a.value()) + " * " +
                        shape_of(b.value()));
  }
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() * b.value();
  return a.tape()->record(std::move(out), any_grad(a, b),
                          [ia, ib](Tape& t, int, const Matrix& g) {
                            if (t.requires_grad(ia)) {
                              t.accumulate(ia, g * t.value(ib).transpose());
                            }
                            if (t.requires_grad(ib)) {
                              t.accumulate(ib, t.value(ia).transpose() * g);
                            }
                          });
}

Var linear(Var x, Var w, Var b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeMismatch("linear: input " + shape_of(x.value()) + ", weight " +
                        shape_of(w.value()) + ", bias " + shape_of(b.value()));
  }
  const int ix = x.id(), iw = w.id(), ib = b.id();
  Matrix out(x.rows(), w.cols());
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  const bool rg = any_grad(x) || any_grad(w, b);
  return x.tape()->record(std::move(out), rg,
                          [ix, iw, ib](Tape& t, int, const Matrix& g) {
                            if (t.requires_grad(ix)) {
                              t.accumulate(ix, g * t.value(iw).transpose());
                            }
                            if (t.requires_grad(iw)) {
                              t.accumulate(iw, t.value(ix).transpose() * g);
                            }
                            if (t.requires_grad(ib)) {
                              t.accumulate(ib, g.colwise().sum());
                            }
                          });
}

Var add(Var a, Var b) {
  require_same(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() + b.value(), any_grad(a, b),
                          [ia, ib](Tape& t, int, const Matrix& g) {
                            t.accumulate(ia, g);
                            t.accumulate(ib, g);
                          });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() - b.value(), any_grad(a, b),
                          [ia, ib](Tape& t, int, const Matrix& g) {
                            t.accumulate(ia, g);
                            if (t.requires_grad(ib)) t.accumulate(ib, -g);
                          });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      a.value().cwiseProduct(b.value()), any_grad(a, b),
      [ia, ib](Tape& t, int, const Matrix& g) {
        if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
        if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
      });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeMismatch("add_row: " + shape_of(a.value()) + " + " +
                        shape_of(row.value()));
  }
  const int ia = a.id(), ir = row.id();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape()->record(std::move(out), any_grad(a, row),
                          [ia, ir](Tape& t, int, const Matrix& g) {
                            t.accumulate(ia, g);
                            if (t.requires_grad(ir)) {
                              t.accumulate(ir, g.colwise().sum());
                            }
                          });
}

Var scale(Var a, double s) {
  return unary(a, s * a.value(),
               [s](const Matrix&, const Matrix&, const Matrix& g) -> Matrix {
                 return s * g;
               });
}

Var add_scalar(Var a, double s) {
  return unary(a, (a.value().array() + s).matrix(),
               [](const Matrix&, const Matrix&, const Matrix& g) -> Matrix {
                 return g;
               });
}

Var tanh(Var a) {
  // Vectorized exp form; std::tanh is scalar and dominated training time.
  // |x| > 20 saturates to +-1 in double precision. The 0 * x term keeps
  // NaN inputs visible after the clamp.
  using RowArray =
      Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto& x = a.value().array();
  const RowArray u = (-2.0 * x.cwiseMax(-20.0).cwiseMin(20.0)).exp();
  Matrix y = ((1.0 - u) / (1.0 + u) + 0.0 * x).matrix();
  return unary(a, std::move(y),
               [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
                 return (g.array() * (1.0 - y.array().square())).matrix();
               });
}

Var sigmoid(Var a) {
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return unary(a, std::move(y),
               [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
                 return (g.array() * y.array() * (1.0 - y.array())).matrix();
               });
}

Var exp(Var a) {
  return unary(a, a.value().array().exp().matrix(),
               [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
                 return g.cwiseProduct(y);
               });
}

Var square(Var a) {
  return unary(a, a.value().array().square().matrix(),
               [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
                 return 2.0 * g.cwiseProduct(x);
               });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return unary(a, std::move(out),
               [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
                 return Matrix::Constant(x.rows(), x.cols(), g(0, 0));
               });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var minimum(Var a, Var b) {
  require_same(a, b, "minimum");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      a.value().cwiseMin(b.value()), any_grad(a, b),
      [ia, ib](Tape& t, int, const Matrix& g) {
        // Ties send the gradient to the first argument.
        const auto pick_a =
            (t.value(ia).array() <= t.value(ib).array()).cast<double>();
        if (t.requires_grad(ia)) t.accumulate(ia, (g.array() * pick_a).matrix());
        if (t.requires_grad(ib)) {
          t.accumulate(ib, (g.array() * (1.0 - pick_a)).matrix());
        }
      });
}

Var clamp(Var a, double lo, double hi) {
  return unary(a, a.value().cwiseMax(lo).cwiseMin(hi),
               [lo, hi](const Matrix& x, const Matrix&,
                        const Matrix& g) -> Matrix {
                 const auto inside =
                     (x.array() >= lo && x.array() <= hi).cast<double>();
                 return (g.array() * inside).matrix();
               });
}

Var scale_rows(Var a, const Eigen::VectorXd& s) {
  if (s.size() != a.rows()) {
    throw ShapeMismatch("scale_rows: " + std::to_string(s.size()) +
                        " factors for " + shape_of(a.value()));
  }
  Matrix out = s.asDiagonal() * a.value();
  return unary(a, std::move(out),
               [s](const Matrix&, const Matrix&, const Matrix& g) -> Matrix {
                 return s.asDiagonal() * g;
               });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (Var p : parts) {
    if (p.rows() != rows) throw ShapeMismatch("concat_cols: row count differs");
    cols += p.cols();
    rg = rg || any_grad(p);
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    ids.push_back(p.id());
  }
  return parts[0].tape()->record(
      std::move(out), rg, [ids](Tape& t, int, const Matrix& g) {
        Eigen::Index at = 0;
        for (int id : ids) {
          const Eigen::Index c = t.value(id).cols();
          if (t.requires_grad(id)) t.accumulate(id, g.middleCols(at, c));
          at += c;
        }
      });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeMismatch("slice_cols out of range for " + shape_of(a.value()));
  }
  return unary(a, a.value().middleCols(start, count),
               [start, count](const Matrix& x, const Matrix&,
                              const Matrix& g) -> Matrix {
                 Matrix d = Matrix::Zero(x.rows(), x.cols());
                 d.middleCols(start, count) = g;
                 return d;
               });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (Var p : parts) {
    if (p.cols() != cols) throw ShapeMismatch("concat_rows: column count differs");
    rows += p.rows();
    rg = rg || any_grad(p);
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    ids.push_back(p.id());
  }
  return parts[0].tape()->record(
      std::move(out), rg, [ids](Tape& t, int, const Matrix& g) {
        Eigen::Index at = 0;
        for (int id : ids) {
          const Eigen::Index r = t.value(id).rows();
          if (t.requires_grad(id)) t.accumulate(id, g.middleRows(at, r));
          at += r;
        }
      });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeMismatch("slice_rows out of range for " + shape_of(a.value()));
  }
  return unary(a, a.value().middleRows(start, count),
               [start, count](const Matrix& x, const Matrix&,
                              const Matrix& g) -> Matrix {
                 Matrix d = Matrix::Zero(x.rows(), x.cols());
                 d.middleRows(start, count) = g;
                 return d;
               });
}

Var gather_rows(Var a, std::vector<int> index) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= x.rows()) {
      throw ShapeMismatch("gather_rows: index out of range");
    }
    out.row(static_cast<Eigen::Index>(r)) = x.row(index[r]);
  }
  return unary(a, std::move(out),
               [index = std::move(index)](const Matrix& x, const Matrix&,
                                          const Matrix& g) -> Matrix {
                 Matrix d = Matrix::Zero(x.rows(), x.cols());
                 for (std::size_t r = 0; r < index.size(); ++r) {
                   d.row(index[r]) += g.row(static_cast<Eigen::Index>(r));
                 }
                 return d;
               });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw ShapeMismatch("reshape " + shape_of(a.value()) + " to " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return unary(a, std::move(out),
               [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
                 return Eigen::Map<const Matrix>(g.data(), x.rows(), x.cols());
               });
}

Var softmax_rows(Var a) {
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    y.row(r).array() -= y.row(r).maxCoeff();
    y.row(r) = y.row(r).array().exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return unary(a, std::move(y),
               [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
                 const Eigen::VectorXd dot = (g.cwiseProduct(y)).rowwise().sum();
                 Matrix d = g;
                 d.colwise() -= dot;
                 return d.cwiseProduct(y);
               });
}

Var log_softmax_rows(Var a) {
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    const double lse = m + std::log((y.row(r).array() - m).exp().sum());
    y.row(r).array() -= lse;
  }
  return unary(a, std::move(y),
               [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
                 const Eigen::VectorXd total = g.rowwise().sum();
                 Matrix d = y.array().exp().matrix();
                 d = g - Matrix(total.asDiagonal() * d);
                 return d;
               });
}

Var pick(Var a, std::vector<int> col) {
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(col.size()) != x.rows()) {
    throw ShapeMismatch("pick: one column index per row required");
  }
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (col[r] < 0 || col[r] >= x.cols()) {
      throw ShapeMismatch("pick: column index out of range");
    }
    out(r, 0) = x(r, col[r]);
  }
  return unary(a, std::move(out),
               [col = std::move(col)](const Matrix& x, const Matrix&,
                                      const Matrix& g) -> Matrix {
                 Matrix d = Matrix::Zero(x.rows(), x.cols());
                 for (Eigen::Index r = 0; r < x.rows(); ++r) {
                   d(r, col[r]) = g(r, 0);
                 }
                 return d;
               });
}

Var weighted_group_sum(Var w, Var f) {
  const Eigen::Index batch = w.rows(), groups = w.cols();
  if (f.rows() != batch * groups) {
    throw ShapeMismatch("weighted_group_sum: weights " + shape_of(w.value()) +
                        " vs features " + shape_of(f.value()));
  }
  const Eigen::Index dim = f.cols();
  Matrix out(batch, dim);
  for (Eigen::Index b = 0; b < batch; ++b) {
    out.row(b).noalias() =
        w.value().row(b) * f.value().middleRows(b * groups, groups);
  }
  const int iw = w.id(), i_f = f.id();
  return w.tape()->record(
      std::move(out), any_grad(w, f),
      [iw, i_f, batch, groups, dim](Tape& t, int, const Matrix& g) {
        const Matrix& wv = t.value(iw);
        const Matrix& fv = t.value(i_f);
        if (t.requires_grad(iw)) {
          Matrix dw(batch, groups);
          for (Eigen::Index b = 0; b < batch; ++b) {
            dw.row(b).noalias() =
                g.row(b) * fv.middleRows(b * groups, groups).transpose();
          }
          t.accumulate(iw, dw);
        }
        if (t.requires_grad(i_f)) {
          Matrix df(batch * groups, dim);
          for (Eigen::Index b = 0; b < batch; ++b) {
            df.middleRows(b * groups, groups).noalias() =
                wv.row(b).transpose() * g.row(b);
          }
          t.accumulate(i_f, df);
        }
      });
}

namespace {

// Patch matrix of one sample: row = output pixel, column = (c, ki, kj).
void im2col(const double* x, const ConvShape& s, Matrix& cols) {
  const int oh = s.out_height(), ow = s.out_width(), k = s.kernel;
  cols.resize(static_cast<Eigen::Index>(oh) * ow,
              static_cast<Eigen::Index>(s.in_channels) * k * k);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* row = cols.row(oy * ow + ox).data();
      for (int c = 0; c < s.in_channels; ++c) {
        const double* plane = x + static_cast<std::ptrdiff_t>(c) * s.height * s.width;
        for (int ki = 0; ki < k; ++ki) {
          const double* src = plane + (oy * s.stride + ki) * s.width + ox * s.stride;
          for (int kj = 0; kj < k; ++kj) *row++ = src[kj];
        }
      }
    }
  }
}

void col2im_add(const Matrix& cols, const ConvShape& s, double* dx) {
  const int oh = s.out_height(), ow = s.out_width(), k = s.kernel;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* row = cols.row(oy * ow + ox).data();
      for (int c = 0; c < s.in_channels; ++c) {
        double* plane = dx + static_cast<std::ptrdiff_t>(c) * s.height * s.width;
        for (int ki = 0; ki < k; ++ki) {
          double* dst = plane + (oy * s.stride + ki) * s.width + ox * s.stride;
          for (int kj = 0; kj < k; ++kj) dst[kj] += *row++;
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var x, Var w, Var b, const ConvShape& s) {
  const Eigen::Index in_size =
      static_cast<Eigen::Index>(s.in_channels) * s.height * s.width;
  const Eigen::Index patch = static_cast<Eigen::Index>(s.in_channels) *
                             s.kernel * s.kernel;
  if (x.cols() != in_size || w.rows() != patch || b.rows() != 1 ||
      b.cols() != w.cols() || s.out_height() < 1 || s.out_width() < 1) {
    throw ShapeMismatch("conv2d: input " + shape_of(x.value()) + ", weight " +
                        shape_of(w.value()));
  }
  const Eigen::Index out_c = w.cols();
  const Eigen::Index pixels =
      static_cast<Eigen::Index>(s.out_height()) * s.out_width();
  const Eigen::Index batch = x.rows();
  Matrix out(batch, out_c * pixels);
  Matrix cols, y;
  for (Eigen::Index i = 0; i < batch; ++i) {
    im2col(x.value().row(i).data(), s, cols);
    y.noalias() = cols * w.value();
    y.rowwise() += b.value().row(0);
    // Store channel-major: out(i, o * pixels + p) = y(p, o).
    Eigen::Map<Matrix>(out.row(i).data(), out_c, pixels) = y.transpose();
  }
  const int ix = x.id(), iw = w.id(), ib = b.id();
  const bool rg = any_grad(x) || any_grad(w, b);
  return x.tape()->record(
      std::move(out), rg,
      [ix, iw, ib, s, out_c, pixels, batch](Tape& t, int, const Matrix& g) {
        const Matrix& xv = t.value(ix);
        const Matrix& wv = t.value(iw);
        Matrix dw = Matrix::Zero(wv.rows(), wv.cols());
        Matrix db = Matrix::Zero(1, out_c);
        Matrix dx;
        const bool need_x = t.requires_grad(ix);
        if (need_x) dx = Matrix::Zero(xv.rows(), xv.cols());
        Matrix cols, dy, dcols;
        for (Eigen::Index i = 0; i < batch; ++i) {
          dy = Eigen::Map<const Matrix>(g.row(i).data(), out_c, pixels)
                   .transpose();
          im2col(xv.row(i).data(), s, cols);
          dw.noalias() += cols.transpose() * dy;
          db += dy.colwise().sum();
          if (need_x) {
            dcols.noalias() = dy * wv.transpose();
            col2im_add(dcols, s, dx.row(i).data());
          }
        }
        if (t.requires_grad(iw)) t.accumulate(iw, dw);
        if (t.requires_grad(ib)) t.accumulate(ib, db);
        if (need_x) t.accumulate(ix, dx);
      });
}

}  // namespace ad
}  // namespace pushgrid
