// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odecme/imaging.hpp"
#include "odecme/lie_basis.hpp"
#include "odecme/losses.hpp"
#include "odecme/matexp.hpp"
#include "odecme/odeflow.hpp"

namespace odecme {

struct RegistrationConfig {
  GroupSpec group = GroupSpec::Aff2;
  bool complex_coeffs = true;
  SolverKind solver = SolverKind::RK4;
  LossKind loss = LossKind::MSE;
  int levels = 4;
  double downscale = 2.0;
  int n_terms = kDefaultExpTerms;
  int iterations = 500;
  double lr_theta = 0.1;  // critic
  double lr_phi = 0.01;   // flow net
  double lr_u = 0.01;     // coefficient seed
  std::uint64_t seed = 0;
  int mine_batch = 0;      // 0 = per-level default
  GeneratorMask mask;      // empty = all generators active
  bool drmime_mode = false;  // one shared real v, no coefficient flow
  int warmup_iters = 0;      // MINE: critic-only updates before joint ascent
  bool convergence_stop = false;
  bool emit_params = false;  // keep the optimizer checkpoint on the result

  void validate() const;
};

// Everything a finished run reports. h maps fixed-frame points into the
// moving frame; h_inv is built from the negated coefficients, not a matrix
// inverse. trajectory[l-1] is the flat coefficient vector at level l.
struct TransformResult {
  ComplexMatrix h, h_inv;
  CoefficientTrajectory trajectory;
  LevelSchedule schedule;
  std::vector<double> loss_history;  // objective value per iteration
  int iterations_run = 0;
  bool converged = false;

  GroupSpec group = GroupSpec::Aff2;
  bool complex_coeffs = true;
  SolverKind solver = SolverKind::RK4;
  LossKind loss = LossKind::MSE;
  int n_terms = kDefaultExpTerms;
  double downscale = 2.0;
  std::uint64_t seed = 0;
  GeneratorMask mask;
  bool drmime_mode = false;
  int mine_batch = 0;
  std::vector<int> fixed_dims, moving_dims;  // {w, h} or {w, h, d}
  int channels = 1;
  std::string params_checkpoint;  // optimizer state JSON; empty unless requested
};

// Full gradient-ascent driver: build pyramids, integrate the coefficient
// trajectory, ascend the symmetric objective, report final transforms. The
// final trajectory and matrices are recomputed once more from the converged
// parameters outside the optimization tape.
TransformResult register_images(const Image& fixed, const Image& moving,
                                const RegistrationConfig& cfg);

// Canonical JSON form (stable field order; bit-exact doubles), and its
// inverse. save/load wrap these with file I/O.
std::string result_json(const TransformResult& r);
TransformResult result_from_json(const std::string& text);
void save_result(const std::string& path, const TransformResult& r);
TransformResult load_result(const std::string& path);

}  // namespace odecme
