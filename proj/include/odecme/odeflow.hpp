// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "odecme/error.hpp"
#include "odecme/mlp.hpp"
#include "odecme/tape.hpp"

namespace odecme {

enum class SolverKind { Euler, RK4 };

SolverKind parse_solver(const std::string& name);  // "euler" | "rk4"
std::string solver_name(SolverKind s);

// Resolution scales s_1 > s_2 > ... > s_L; pyramids use s_l = d^(-l+1).
struct LevelSchedule {
  std::vector<double> scales;

  static LevelSchedule geometric(int levels, double downscale);
  int levels() const { return static_cast<int>(scales.size()); }
  void validate() const;
};

// Integrates dv/ds = g(s, v) across the schedule, coarse to fine: the level
// scales ARE the integration grid (no sub-stepping). Entry [l-1] of the
// result is v_l; v_L = u by construction.
//
// The recursion is shared by the plain and tape instantiations below, so the
// step arithmetic exists exactly once.
//   Euler: v_l = v_{l+1} + h * g(s_{l+1}, v_{l+1}),  h = s_l - s_{l+1}
//   RK4 (3/8 rule):
//     k1 = h*g(s_{l+1},        v)
//     k2 = h*g(s_{l+1} + h/3,  v + k1/3)
//     k3 = h*g(s_{l+1} + 2h/3, v - k1/3 + k2)
//     k4 = h*g(s_l,            v + k1 - k2 + k3)
//     v_l = v + (k1 + 3 k2 + 3 k3 + k4)/8
template <class Vec, class Field, class Axpy, class Scale>
std::vector<Vec> integrate_levels(const Vec& u, const LevelSchedule& sched, SolverKind kind,
                                  Field&& g, Axpy&& axpy, Scale&& scl) {
  sched.validate();
  int levels = sched.levels();
  std::vector<Vec> traj(static_cast<size_t>(levels), u);
  for (int l = levels - 1; l >= 1; --l) {
    const Vec& v = traj[static_cast<size_t>(l)];  // v_{l+1} (1-based level l+1)
    double s1 = sched.scales[static_cast<size_t>(l)];
    double s0 = sched.scales[static_cast<size_t>(l - 1)];
    double h = s0 - s1;
    if (kind == SolverKind::Euler) {
      traj[static_cast<size_t>(l - 1)] = axpy(v, h, g(s1, v));
    } else {
      Vec k1 = scl(g(s1, v), h);
      Vec k2 = scl(g(s1 + h / 3.0, axpy(v, 1.0 / 3.0, k1)), h);
      Vec k3 = scl(g(s1 + 2.0 * h / 3.0, axpy(axpy(v, -1.0 / 3.0, k1), 1.0, k2)), h);
      Vec k4 = scl(g(s0, axpy(axpy(axpy(v, 1.0, k1), -1.0, k2), 1.0, k3)), h);
      traj[static_cast<size_t>(l - 1)] =
          axpy(axpy(axpy(axpy(v, 0.125, k1), 0.375, k2), 0.375, k3), 0.125, k4);
    }
  }
  return traj;
}

// Plain evaluation over flat coefficient vectors (complex coefficients travel
// as [re || im], see lie_basis::flatten).
using FlowField = std::function<std::vector<double>(double, const std::vector<double>&)>;
using CoefficientTrajectory = std::vector<std::vector<double>>;

CoefficientTrajectory euler_levels(const std::vector<double>& u, const FlowField& g,
                                   const LevelSchedule& sched);
CoefficientTrajectory rk4_levels(const std::vector<double>& u, const FlowField& g,
                                 const LevelSchedule& sched);

// Field backed by an MLP taking [s, v...] and returning dv/ds.
FlowField mlp_flow_field(const MlpSpec& spec, const double* params);

// Tape instantiation; u is a (1 x n) row, the field is the flow net applied
// through tape ops, so gradients reach u and the net parameters. A valid
// field_mask (1 x n of 0/1) is multiplied into the field output so masked
// coefficients never move during integration.
std::vector<Var> integrate_levels_op(Tape& t, Var u, const LevelSchedule& sched,
                                     SolverKind kind, const MlpSpec& flow,
                                     const MlpVars& vars, Var field_mask = {});

// Per-level CSV dump "level,s,c0,c1,..." for trajectory plots.
void write_trajectory_csv(const std::string& path, const LevelSchedule& sched,
                          const CoefficientTrajectory& traj);

}  // namespace odecme
