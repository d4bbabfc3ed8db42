// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/mlp.hpp"

#include <cmath>

#include "odecme/error.hpp"

namespace odecme {

std::vector<int> MlpSpec::widths() const {
  std::vector<int> w;
  w.push_back(input);
  for (int h : hidden) w.push_back(h);
  w.push_back(output);
  return w;
}

size_t MlpSpec::param_count() const {
  std::vector<int> w = widths();
  size_t n = 0;
  for (size_t l = 0; l + 1 < w.size(); ++l)
    n += static_cast<size_t>(w[l]) * w[l + 1] + w[l + 1];
  return n;
}

MlpSpec critic_spec(int image_channels) {
  if (image_channels < 1) throw Error::invalid("critic_spec: need at least one channel");
  return {2 * image_channels, {100, 100}, 1};
}

MlpSpec flow_spec(int n_coeff_scalars) {
  if (n_coeff_scalars < 1) throw Error::invalid("flow_spec: need at least one coefficient");
  return {1 + n_coeff_scalars, {100}, n_coeff_scalars};
}

void init_mlp(Rng& rng, const MlpSpec& spec, double* params, bool zero_output_layer) {
  std::vector<int> w = spec.widths();
  size_t p = 0;
  for (size_t l = 0; l + 1 < w.size(); ++l) {
    bool last = l + 2 == w.size();
    size_t count = static_cast<size_t>(w[l]) * w[l + 1];
    if (last && zero_output_layer) {
      for (size_t i = 0; i < count + static_cast<size_t>(w[l + 1]); ++i) params[p++] = 0.0;
      continue;
    }
    double limit = std::sqrt(6.0 / (w[l] + w[l + 1]));
    for (size_t i = 0; i < count; ++i) params[p++] = rng.uniform(-limit, limit);
    for (int i = 0; i < w[l + 1]; ++i) params[p++] = 0.0;
  }
}

MlpVars mlp_leaves(Tape& t, const MlpSpec& spec, const double* params) {
  MlpVars vars;
  std::vector<int> w = spec.widths();
  size_t p = 0;
  for (size_t l = 0; l + 1 < w.size(); ++l) {
    Tensor wt(w[l], w[l + 1]);
    for (double& x : wt.v) x = params[p++];
    Tensor bt(1, w[l + 1]);
    for (double& x : bt.v) x = params[p++];
    vars.weights.push_back(t.leaf(std::move(wt)));
    vars.biases.push_back(t.leaf(std::move(bt)));
  }
  return vars;
}

Var mlp_apply(Tape& t, const MlpSpec& spec, const MlpVars& vars, Var x) {
  if (t.val(x).cols != spec.input)
    throw Error::dim("mlp: input has " + std::to_string(t.val(x).cols) + " columns, expected " +
                     std::to_string(spec.input));
  Var h = x;
  for (size_t l = 0; l < vars.weights.size(); ++l) {
    h = t.add_rowvec(t.matmul(h, vars.weights[l]), vars.biases[l]);
    if (l + 1 < vars.weights.size()) h = t.relu(h);
  }
  return h;
}

void mlp_accumulate_grads(const Tape& t, const MlpSpec& spec, const MlpVars& vars,
                          double* grads) {
  (void)spec;
  size_t p = 0;
  for (size_t l = 0; l < vars.weights.size(); ++l) {
    for (double g : t.grad(vars.weights[l]).v) grads[p++] += g;
    for (double g : t.grad(vars.biases[l]).v) grads[p++] += g;
  }
}

std::vector<double> mlp_forward(const MlpSpec& spec, const double* params,
                                const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != spec.input)
    throw Error::dim("mlp: input length mismatch");
  Tape t;
  // Constants suffice: no gradient is requested from this path.
  MlpVars vars;
  std::vector<int> w = spec.widths();
  size_t p = 0;
  for (size_t l = 0; l + 1 < w.size(); ++l) {
    Tensor wt(w[l], w[l + 1]);
    for (double& v : wt.v) v = params[p++];
    Tensor bt(1, w[l + 1]);
    for (double& v : bt.v) v = params[p++];
    vars.weights.push_back(t.constant(std::move(wt)));
    vars.biases.push_back(t.constant(std::move(bt)));
  }
  Var out = mlp_apply(t, spec, vars, t.constant(Tensor::row(x)));
  return t.val(out).v;
}

}  // namespace odecme
