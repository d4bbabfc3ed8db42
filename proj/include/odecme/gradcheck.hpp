// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace odecme {

// One finite-difference check: a function of a flat input vector with n_out
// outputs, its reverse-mode gradient, and the comparison thresholds. `value`
// is called at perturbed points, `grad(x, j)` returns d out_j / d x.
struct GradCase {
  std::string name;
  std::vector<double> x0;
  double step = 1e-5;
  double tol = 1e-4;
  double abs_floor = 1e-9;  // |a - n| below this always passes
  int n_out = 1;
  std::function<std::vector<double>(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&, int)> grad;
};

struct GradReport {
  std::string name;
  int n_in = 0, n_out = 0;
  double worst_rel = 0.0;  // over entries above the absolute floor
  int worst_in = -1, worst_out = -1;
  double tol = 0.0;
  bool pass = false;
};

// Central differences against the analytic gradient, every output against
// every input. rel = |a - n| / max(|a|, |n|).
GradReport run_gradcheck(const GradCase& c);

// Global case registry. Every differentiable operation contributes cases
// here (builders live next to the harness); tests and the acceptance gate
// iterate the full list so a new op cannot dodge checking.
void register_grad_case(GradCase c);
const std::vector<GradCase>& registered_grad_cases();

}  // namespace odecme
