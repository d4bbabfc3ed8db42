// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>

namespace odecme {

namespace {

using MapM = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMapM =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

CMapM as_eigen(const Tensor& t) { return CMapM(t.v.data(), t.rows, t.cols); }
MapM as_eigen(Tensor& t) { return MapM(t.v.data(), t.rows, t.cols); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw Error::dim(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + ")");
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad = Tensor(n.value.rows, n.value.cols);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value) { return push(std::move(value), true); }
Var Tape::constant(Tensor value) { return push(std::move(value), false); }

const Tensor& Tape::grad(Var x) const {
  const Node& n = node(x);
  if (!n.requires_grad) throw Error::invalid("tape: grad of a non-differentiable node");
  if (!swept_) throw Error::invalid("tape: grad read before backward");
  return n.grad;
}

void Tape::backward(Var root) {
  Node& r = node(root);
  if (r.value.rows != 1 || r.value.cols != 1)
    throw Error::invalid("tape: backward root must be a scalar");
  if (!r.requires_grad) throw Error::invalid("tape: backward root is constant");
  if (swept_) throw Error::invalid("tape: backward called twice; clear() first");
  swept_ = true;
  r.grad.v[0] = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.requires_grad && n.back) n.back(*this);
  }
}

void Tape::clear() {
  nodes_.clear();
  swept_ = false;
}

void Tape::accum(Var x, const Tensor& g) {
  Node& n = node(x);
  if (!n.requires_grad) return;
  check_same_shape(n.grad, g, "accum");
  as_eigen(n.grad) += as_eigen(g);
}

void Tape::accum_scaled(Var x, const Tensor& g, double c) {
  Node& n = node(x);
  if (!n.requires_grad) return;
  check_same_shape(n.grad, g, "accum");
  as_eigen(n.grad) += c * as_eigen(g);
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  check_same_shape(ta, tb, "add");
  Tensor out = ta;
  as_eigen(out) += as_eigen(tb);
  bool rg = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, b](Tape& t) {
      const Tensor& g = t.node(o).grad;
      t.accum(a, g);
      t.accum(b, g);
    };
  return o;
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  check_same_shape(ta, tb, "sub");
  Tensor out = ta;
  as_eigen(out) -= as_eigen(tb);
  bool rg = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, b](Tape& t) {
      const Tensor& g = t.node(o).grad;
      t.accum(a, g);
      t.accum_scaled(b, g, -1.0);
    };
  return o;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  check_same_shape(ta, tb, "mul");
  Tensor out = ta;
  as_eigen(out) = as_eigen(ta).cwiseProduct(as_eigen(tb));
  bool rg = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, b](Tape& t) {
      const Tensor& g = t.node(o).grad;
      if (t.requires_grad(a)) {
        Tensor ga = g;
        as_eigen(ga) = as_eigen(g).cwiseProduct(as_eigen(t.val(b)));
        t.accum(a, ga);
      }
      if (t.requires_grad(b)) {
        Tensor gb = g;
        as_eigen(gb) = as_eigen(g).cwiseProduct(as_eigen(t.val(a)));
        t.accum(b, gb);
      }
    };
  return o;
}

Var Tape::div(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  check_same_shape(ta, tb, "div");
  Tensor out = ta;
  as_eigen(out) = as_eigen(ta).cwiseQuotient(as_eigen(tb));
  bool rg = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, b](Tape& t) {
      const Tensor& g = t.node(o).grad;
      const Tensor& vb = t.val(b);
      if (t.requires_grad(a)) {
        Tensor ga = g;
        as_eigen(ga) = as_eigen(g).cwiseQuotient(as_eigen(vb));
        t.accum(a, ga);
      }
      if (t.requires_grad(b)) {
        Tensor gb = g;
        as_eigen(gb) = -as_eigen(g).cwiseProduct(as_eigen(t.node(o).value))
                            .cwiseQuotient(as_eigen(vb));
        t.accum(b, gb);
      }
    };
  return o;
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::scale(Var a, double c) {
  Tensor out = val(a);
  as_eigen(out) *= c;
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, c](Tape& t) { t.accum_scaled(a, t.node(o).grad, c); };
  return o;
}

Var Tape::add_scalar(Var a, double c) {
  Tensor out = val(a);
  as_eigen(out).array() += c;
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a](Tape& t) { t.accum(a, t.node(o).grad); };
  return o;
}

Var Tape::add_scaled(Var a, Var b, double c) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  check_same_shape(ta, tb, "add_scaled");
  Tensor out = ta;
  as_eigen(out) += c * as_eigen(tb);
  bool rg = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, b, c](Tape& t) {
      const Tensor& g = t.node(o).grad;
      t.accum(a, g);
      t.accum_scaled(b, g, c);
    };
  return o;
}

Var Tape::relu(Var a) {
  Tensor out = val(a);
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a](Tape& t) {
      const Tensor& g = t.node(o).grad;
      const Tensor& in = t.val(a);
      Tensor ga(g.rows, g.cols);
      for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] = in.v[i] > 0.0 ? g.v[i] : 0.0;
      t.accum(a, ga);
    };
  return o;
}

Var Tape::sqrt(Var a) {
  Tensor out = val(a);
  for (double& x : out.v) x = std::sqrt(x);
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a](Tape& t) {
      const Tensor& g = t.node(o).grad;
      const Tensor& y = t.node(o).value;
      Tensor ga(g.rows, g.cols);
      for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] = 0.5 * g.v[i] / y.v[i];
      t.accum(a, ga);
    };
  return o;
}

Var Tape::square(Var a) { return mul(a, a); }

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (ta.cols != tb.rows)
    throw Error::dim("matmul: inner dimensions differ (" + std::to_string(ta.cols) + " vs " +
                     std::to_string(tb.rows) + ")");
  Tensor out(ta.rows, tb.cols);
  as_eigen(out).noalias() = as_eigen(ta) * as_eigen(tb);
  bool rg = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, b](Tape& t) {
      const Tensor& g = t.node(o).grad;
      if (t.requires_grad(a)) {
        Tensor ga(t.val(a).rows, t.val(a).cols);
        as_eigen(ga).noalias() = as_eigen(g) * as_eigen(t.val(b)).transpose();
        t.accum(a, ga);
      }
      if (t.requires_grad(b)) {
        Tensor gb(t.val(b).rows, t.val(b).cols);
        as_eigen(gb).noalias() = as_eigen(t.val(a)).transpose() * as_eigen(g);
        t.accum(b, gb);
      }
    };
  return o;
}

Var Tape::add_rowvec(Var x, Var b) {
  const Tensor& tx = val(x);
  const Tensor& tb = val(b);
  if (tb.rows != 1 || tb.cols != tx.cols)
    throw Error::dim("add_rowvec: bias must be 1x" + std::to_string(tx.cols));
  Tensor out = tx;
  as_eigen(out).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(tb.v.data(), tb.cols);
  bool rg = requires_grad(x) || requires_grad(b);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, x, b](Tape& t) {
      const Tensor& g = t.node(o).grad;
      t.accum(x, g);
      if (t.requires_grad(b)) {
        Tensor gb(1, g.cols);
        Eigen::Map<Eigen::RowVectorXd>(gb.v.data(), gb.cols) = as_eigen(g).colwise().sum();
        t.accum(b, gb);
      }
    };
  return o;
}

Var Tape::sum(Var a) {
  Tensor out = Tensor::scalar(as_eigen(val(a)).sum());
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a](Tape& t) {
      double g = t.node(o).grad.v[0];
      const Tensor& in = t.val(a);
      Tensor ga(in.rows, in.cols);
      as_eigen(ga).setConstant(g);
      t.accum(a, ga);
    };
  return o;
}

Var Tape::mean(Var a) {
  const Tensor& ta = val(a);
  double n = static_cast<double>(ta.size());
  Tensor out = Tensor::scalar(as_eigen(ta).sum() / n);
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, n](Tape& t) {
      double g = t.node(o).grad.v[0] / n;
      const Tensor& in = t.val(a);
      Tensor ga(in.rows, in.cols);
      as_eigen(ga).setConstant(g);
      t.accum(a, ga);
    };
  return o;
}

Var Tape::log_mean_exp(Var a) {
  const Tensor& ta = val(a);
  if (ta.rows != 1 && ta.cols != 1)
    throw Error::dim("log_mean_exp: input must be a vector");
  double m = *std::max_element(ta.v.begin(), ta.v.end());
  double s = 0.0;
  for (double x : ta.v) s += std::exp(x - m);
  double n = static_cast<double>(ta.size());
  Tensor out = Tensor::scalar(m + std::log(s / n));
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, m, s](Tape& t) {
      // d/dx_i = exp(x_i - m) / sum_j exp(x_j - m)
      double g = t.node(o).grad.v[0];
      const Tensor& in = t.val(a);
      Tensor ga(in.rows, in.cols);
      for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] = g * std::exp(in.v[i] - m) / s;
      t.accum(a, ga);
    };
  return o;
}

Var Tape::reshape(Var a, int rows, int cols) {
  const Tensor& ta = val(a);
  if (static_cast<size_t>(rows) * cols != ta.size())
    throw Error::dim("reshape: element count mismatch");
  Tensor out(rows, cols);
  out.v = ta.v;
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a](Tape& t) {
      const Tensor& g = t.node(o).grad;
      const Tensor& in = t.val(a);
      Tensor ga(in.rows, in.cols);
      ga.v = g.v;
      t.accum(a, ga);
    };
  return o;
}

Var Tape::slice_cols(Var a, int first, int count) {
  const Tensor& ta = val(a);
  if (first < 0 || count < 0 || first + count > ta.cols)
    throw Error::dim("slice_cols: range out of bounds");
  Tensor out(ta.rows, count);
  for (int i = 0; i < ta.rows; ++i)
    for (int j = 0; j < count; ++j) out.at(i, j) = ta.at(i, first + j);
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, first, count](Tape& t) {
      const Tensor& g = t.node(o).grad;
      const Tensor& in = t.val(a);
      Tensor ga(in.rows, in.cols);
      for (int i = 0; i < in.rows; ++i)
        for (int j = 0; j < count; ++j) ga.at(i, first + j) = g.at(i, j);
      t.accum(a, ga);
    };
  return o;
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (ta.rows != tb.rows) throw Error::dim("concat_cols: row counts differ");
  Tensor out(ta.rows, ta.cols + tb.cols);
  for (int i = 0; i < ta.rows; ++i) {
    for (int j = 0; j < ta.cols; ++j) out.at(i, j) = ta.at(i, j);
    for (int j = 0; j < tb.cols; ++j) out.at(i, ta.cols + j) = tb.at(i, j);
  }
  bool rg = requires_grad(a) || requires_grad(b);
  int ca = ta.cols;  // before push: the node vector may reallocate
  Var o = push(std::move(out), rg);
  if (rg) {
    node(o).back = [o, a, b, ca](Tape& t) {
      const Tensor& g = t.node(o).grad;
      if (t.requires_grad(a)) {
        const Tensor& va = t.val(a);
        Tensor ga(va.rows, va.cols);
        for (int i = 0; i < va.rows; ++i)
          for (int j = 0; j < va.cols; ++j) ga.at(i, j) = g.at(i, j);
        t.accum(a, ga);
      }
      if (t.requires_grad(b)) {
        const Tensor& vb = t.val(b);
        Tensor gb(vb.rows, vb.cols);
        for (int i = 0; i < vb.rows; ++i)
          for (int j = 0; j < vb.cols; ++j) gb.at(i, j) = g.at(i, ca + j);
        t.accum(b, gb);
      }
    };
  }
  return o;
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  const Tensor& ta = val(a);
  Tensor out(static_cast<int>(idx.size()), ta.cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    int r = idx[i];
    if (r < 0 || r >= ta.rows) throw Error::dim("gather_rows: index out of range");
    for (int j = 0; j < ta.cols; ++j) out.at(static_cast<int>(i), j) = ta.at(r, j);
  }
  bool rg = requires_grad(a);
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).back = [o, a, idx = std::move(idx)](Tape& t) {
      const Tensor& g = t.node(o).grad;
      const Tensor& in = t.val(a);
      Tensor ga(in.rows, in.cols);
      for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < in.cols; ++j)
          ga.at(idx[i], j) += g.at(static_cast<int>(i), j);
      t.accum(a, ga);
    };
  return o;
}

Var Tape::custom(Tensor value, std::vector<Var> parents,
                 std::function<void(const Tensor&, const GradSink&)> back) {
  bool rg = false;
  for (Var p : parents) rg = rg || requires_grad(p);
  Var o = push(std::move(value), rg);
  if (rg)
    node(o).back = [o, parents = std::move(parents), back = std::move(back)](Tape& t) {
      GradSink sink = [&t, &parents](int slot, const Tensor& contribution) {
        t.accum(parents[static_cast<size_t>(slot)], contribution);
      };
      back(t.node(o).grad, sink);
    };
  return o;
}

}  // namespace odecme
