// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/odeflow.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace odecme {

SolverKind parse_solver(const std::string& name) {
  if (name == "euler") return SolverKind::Euler;
  if (name == "rk4") return SolverKind::RK4;
  throw Error::invalid("unknown solver '" + name + "' (expected euler or rk4)");
}

std::string solver_name(SolverKind s) { return s == SolverKind::Euler ? "euler" : "rk4"; }

LevelSchedule LevelSchedule::geometric(int levels, double downscale) {
  if (levels < 1) throw Error::invalid("schedule: need at least one level");
  if (!(downscale > 1.0)) throw Error::invalid("schedule: downscale factor must exceed 1");
  LevelSchedule s;
  for (int l = 1; l <= levels; ++l) s.scales.push_back(std::pow(downscale, -(l - 1)));
  return s;
}

void LevelSchedule::validate() const {
  if (scales.empty()) throw Error::invalid("schedule: empty");
  for (size_t i = 0; i + 1 < scales.size(); ++i)
    if (!(scales[i] > scales[i + 1]))
      throw Error::invalid("schedule: scales must be strictly decreasing");
  for (double s : scales)
    if (!std::isfinite(s)) throw Error::invalid("schedule: non-finite scale");
}

namespace {

CoefficientTrajectory run_plain(const std::vector<double>& u, const FlowField& g,
                                const LevelSchedule& sched, SolverKind kind) {
  size_t n = u.size();
  auto field = [&](double s, const std::vector<double>& v) {
    std::vector<double> out = g(s, v);
    if (out.size() != n) throw Error::dim("flow field returned wrong length");
    return out;
  };
  auto axpy = [n](const std::vector<double>& a, double c, const std::vector<double>& b) {
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + c * b[i];
    return out;
  };
  auto scl = [n](const std::vector<double>& a, double c) {
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = c * a[i];
    return out;
  };
  return integrate_levels(u, sched, kind, field, axpy, scl);
}

}  // namespace

CoefficientTrajectory euler_levels(const std::vector<double>& u, const FlowField& g,
                                   const LevelSchedule& sched) {
  return run_plain(u, g, sched, SolverKind::Euler);
}

CoefficientTrajectory rk4_levels(const std::vector<double>& u, const FlowField& g,
                                 const LevelSchedule& sched) {
  return run_plain(u, g, sched, SolverKind::RK4);
}

FlowField mlp_flow_field(const MlpSpec& spec, const double* params) {
  return [spec, params](double s, const std::vector<double>& v) {
    std::vector<double> x;
    x.reserve(v.size() + 1);
    x.push_back(s);
    x.insert(x.end(), v.begin(), v.end());
    return mlp_forward(spec, params, x);
  };
}

std::vector<Var> integrate_levels_op(Tape& t, Var u, const LevelSchedule& sched,
                                     SolverKind kind, const MlpSpec& flow,
                                     const MlpVars& vars, Var field_mask) {
  const Tensor& tu = t.val(u);
  if (tu.rows != 1 || tu.cols != flow.output)
    throw Error::dim("integrate_levels: u must be 1x" + std::to_string(flow.output));
  auto field = [&](double s, Var v) {
    Var x = t.concat_cols(t.constant(Tensor::scalar(s)), v);
    Var out = mlp_apply(t, flow, vars, x);
    return field_mask.id >= 0 ? t.mul(out, field_mask) : out;
  };
  auto axpy = [&](Var a, double c, Var b) { return t.add_scaled(a, b, c); };
  auto scl = [&](Var a, double c) { return t.scale(a, c); };
  return integrate_levels(u, sched, kind, field, axpy, scl);
}

void write_trajectory_csv(const std::string& path, const LevelSchedule& sched,
                          const CoefficientTrajectory& traj) {
  if (sched.scales.size() != traj.size())
    throw Error::dim("trajectory dump: schedule and trajectory lengths differ");
  std::ofstream out(path);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  size_t width = traj.empty() ? 0 : traj[0].size();
  out << "level,s";
  for (size_t i = 0; i < width; ++i) out << ",c" << i;
  out << "\n";
  char buf[32];
  for (size_t l = 0; l < traj.size(); ++l) {
    out << (l + 1);
    std::snprintf(buf, sizeof buf, ",%.17g", sched.scales[l]);
    out << buf;
    for (double v : traj[l]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << "\n";
  }
  if (!out.flush()) throw Error::io("failed writing '" + path + "'");
}

}  // namespace odecme
