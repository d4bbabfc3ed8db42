// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "odecme/rng.hpp"
#include "odecme/tape.hpp"

namespace odecme {

// Fully connected net: ReLU on hidden layers, no output activation.
// Parameters are laid out layer by layer, W (fan_in x fan_out, row-major)
// followed by its bias row.
struct MlpSpec {
  int input = 0;
  std::vector<int> hidden;
  int output = 0;

  std::vector<int> widths() const;
  size_t param_count() const;
};

// Critic network: pairs of pixel values, channels side by side (2C inputs),
// two hidden layers of 100, scalar score.
MlpSpec critic_spec(int image_channels);

// Flow field network: scale plus the flat coefficient vector in, coefficient
// velocity out, one hidden layer of 100.
MlpSpec flow_spec(int n_coeff_scalars);

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases. With
// zero_output_layer the last layer's weights and bias are zeroed so the net
// is identically zero at start; used for the flow field so optimization
// begins from a constant trajectory.
void init_mlp(Rng& rng, const MlpSpec& spec, double* params, bool zero_output_layer);

// Per-layer leaves created from flat parameter memory; reuse one MlpVars for
// every application within an iteration so gradients accumulate.
struct MlpVars {
  std::vector<Var> weights, biases;
};
MlpVars mlp_leaves(Tape& t, const MlpSpec& spec, const double* params);

// x is (N x input); returns (N x output).
Var mlp_apply(Tape& t, const MlpSpec& spec, const MlpVars& vars, Var x);

// Adds the leaves' gradients into flat grad memory (layout as params).
void mlp_accumulate_grads(const Tape& t, const MlpSpec& spec, const MlpVars& vars,
                          double* grads);

// Convenience single-vector evaluation (records nothing externally).
std::vector<double> mlp_forward(const MlpSpec& spec, const double* params,
                                const std::vector<double>& x);

}  // namespace odecme
