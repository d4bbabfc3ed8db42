// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "odecme/error.hpp"

namespace odecme {

// Dense row-major 2-D array. Vectors are 1xN, scalars 1x1, sampled images
// (n_pixels x channels).
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  static Tensor row(const std::vector<double>& data) {
    Tensor t(1, static_cast<int>(data.size()));
    t.v = data;
    return t;
  }

  double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

// Handle to a tape node. Valid only for the tape that produced it, until the
// next clear().
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over Tensor-valued nodes. Operations record a
// backward closure; backward() replays them in reverse creation order and
// accumulates gradients into every node with requires_grad.
//
// Nodes whose inputs are all constants are folded: they carry a value but no
// closure, so subgraphs of constants cost nothing during the backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.
  Var leaf(Tensor value);
  // Non-differentiable input; never receives a gradient.
  Var constant(Tensor value);

  const Tensor& val(Var x) const { return node(x).value; }
  // Gradient of the last backward() root with respect to x. x must require
  // gradients and backward() must have run.
  const Tensor& grad(Var x) const;
  bool requires_grad(Var x) const { return node(x).requires_grad; }

  // Seeds d(root)/d(root) = 1 and sweeps the tape. root must be 1x1.
  // Callable once per recording; clear() resets.
  void backward(Var root);
  void clear();
  size_t size() const { return nodes_.size(); }

  // --- elementwise ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  // a + c * b
  Var add_scaled(Var a, Var b, double c);
  Var relu(Var a);  // subgradient at 0 is 0
  Var sqrt(Var a);
  Var square(Var a);

  // --- linear algebra ---
  // (m x k) * (k x n)
  Var matmul(Var a, Var b);
  // X (n x c) + broadcast row b (1 x c)
  Var add_rowvec(Var x, Var b);

  // --- reductions ---
  Var sum(Var a);   // 1x1
  Var mean(Var a);  // 1x1
  // log((1/n) * sum(exp(a))), max-stabilized; a is n x 1 or 1 x n.
  Var log_mean_exp(Var a);

  // --- shape ---
  Var reshape(Var a, int rows, int cols);
  Var slice_cols(Var a, int first, int count);
  Var concat_cols(Var a, Var b);
  // rows[i] = a.row(idx[i])
  Var gather_rows(Var a, std::vector<int> idx);

  // Custom operation: value computed by the caller, backward supplied as a
  // closure receiving the output gradient and an accumulator for each parent.
  // Parents that do not require gradients receive a null accumulator slot.
  using GradSink = std::function<void(int parent_slot, const Tensor& contribution)>;
  Var custom(Tensor value, std::vector<Var> parents,
             std::function<void(const Tensor& gout, const GradSink& accum)> back);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&)> back;
  };

  const Node& node(Var x) const {
    if (!x.valid() || static_cast<size_t>(x.id) >= nodes_.size())
      throw Error::invalid("tape: stale or invalid Var");
    return nodes_[static_cast<size_t>(x.id)];
  }
  Node& node(Var x) { return const_cast<Node&>(static_cast<const Tape*>(this)->node(x)); }

  Var push(Tensor value, bool requires_grad);
  void accum(Var x, const Tensor& g);
  void accum_scaled(Var x, const Tensor& g, double c);

  std::vector<Node> nodes_;
  bool swept_ = false;
};

}  // namespace odecme
