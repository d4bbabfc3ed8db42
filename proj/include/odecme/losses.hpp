// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "odecme/imaging.hpp"
#include "odecme/lie_basis.hpp"
#include "odecme/mlp.hpp"
#include "odecme/rng.hpp"
#include "odecme/tape.hpp"

namespace odecme {

enum class LossKind { MINE, MSE, NCC };

LossKind parse_loss(const std::string& name);  // "mine" | "mse" | "ncc"
std::string loss_name(LossKind k);

// N pixel rows sampled without replacement, plus a permutation of the same
// rows for the marginal term.
struct SampleBatch {
  std::vector<int> indices;
  std::vector<int> permuted;  // permuted[i] = indices[sigma(i)]
  int size() const { return static_cast<int>(indices.size()); }
};

SampleBatch draw_batch(Rng& rng, long n_pixels, int n);

// min(4096, 10% of the level's pixels), never below 2.
int default_mine_batch(long level_pixels);

// Donsker-Varadhan bound: mean of critic scores on joint pairs minus
// log-mean-exp on marginal pairs. p holds the reference side's pixel rows,
// usually a tape constant; q is the warped side. Critic input columns are
// the reference channels followed by the q channels.
Var mine_op(Tape& t, Var p, Var q, const MlpSpec& critic, const MlpVars& vars,
            const SampleBatch& batch);

// Mean squared difference over all pixels and channels; gradient flows to q
// (ref is expected to be a constant).
Var mse_op(Tape& t, Var q, Var ref);

// Mean over channels of the Pearson correlation between q and ref pixel
// intensities. A zero-variance channel contributes 0 (with a one-time stderr
// warning) rather than NaN.
Var ncc_op(Tape& t, Var q, Var ref);

// Plain evaluations for scoring outside a recording.
double mse(const Image& p, const Image& q);
double ncc(const Image& p, const Image& q);
double mine(const Image& p, const Image& q, const MlpSpec& critic, const double* theta,
            const SampleBatch& batch);

// The full multi-resolution objective, to be MAXIMIZED:
//   sum_l [ score(T_l, Warp(M_l, H_l)) + score(M_l, Warp(T_l, H_l^-1)) ]
// with H_l = mexp(assemble(v_l)), H_l^-1 = mexp(assemble(-v_l)), where
// score is MINE or NCC directly and -MSE for the MSE loss so that larger is
// always better. One shared critic serves all levels and both directions.
struct ObjectiveSetup {
  GroupSpec group = GroupSpec::Aff2;
  bool complex_coeffs = true;
  int n_terms = 10;
  LossKind loss = LossKind::MSE;
  const MlpSpec* critic = nullptr;   // MINE only
  const MlpVars* critic_vars = nullptr;
  int mine_batch = 0;                // 0 = default_mine_batch per level
  Rng* rng = nullptr;                // MINE sampling
  // Optional pinned batches, level-major with forward before inverse
  // (size 2L); used by tests needing mirrored sampling.
  const std::vector<SampleBatch>* fixed_batches = nullptr;
};

// traj[l-1] is the flat coefficient row for level l (see lie_basis::flatten).
// A fresh batch is drawn per level and direction when loss = MINE.
Var symmetric_objective(Tape& t, const ImagePyramid& pyr_t, const ImagePyramid& pyr_m,
                        const std::vector<Var>& traj, const ObjectiveSetup& setup);

}  // namespace odecme
