// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/registration.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "odecme/mlp.hpp"
#include "odecme/params.hpp"
#include "odecme/rng.hpp"

namespace odecme {

using ordered_json = nlohmann::ordered_json;

void RegistrationConfig::validate() const {
  if (levels < 1) throw Error::invalid("registration: need at least one level");
  if (!(downscale > 1.0)) throw Error::invalid("registration: downscale must exceed 1");
  if (n_terms < 1) throw Error::invalid("registration: series needs at least one term");
  if (iterations < 0) throw Error::invalid("registration: negative iteration count");
  if (!(lr_theta > 0.0) || !(lr_phi > 0.0) || !(lr_u > 0.0))
    throw Error::invalid("registration: learning rates must be positive");
  if (mine_batch < 0) throw Error::invalid("registration: negative sample batch");
  if (warmup_iters < 0) throw Error::invalid("registration: negative warm-up count");
  if (drmime_mode && complex_coeffs)
    throw Error::invalid("registration: drmime mode uses real coefficients");
  if (!mask.empty()) {
    if (static_cast<int>(mask.size()) != n_generators(group))
      throw Error::invalid("registration: generator mask length does not match group");
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
      throw Error::invalid("registration: generator mask disables every generator");
  }
}

namespace {

// 0/1 row over the flat coefficient layout; the imaginary half mirrors the
// real half so a disabled generator is off in both.
std::vector<double> mask_flat(const RegistrationConfig& cfg) {
  int ng = n_generators(cfg.group);
  std::vector<double> m(static_cast<size_t>(flat_size(cfg.group, cfg.complex_coeffs)), 1.0);
  for (int k = 0; k < static_cast<int>(cfg.mask.size()); ++k) {
    double on = cfg.mask[static_cast<size_t>(k)] ? 1.0 : 0.0;
    m[static_cast<size_t>(k)] = on;
    if (cfg.complex_coeffs) m[static_cast<size_t>(ng + k)] = on;
  }
  return m;
}

bool is_masked(const RegistrationConfig& cfg) {
  return std::find(cfg.mask.begin(), cfg.mask.end(), false) != cfg.mask.end();
}

CoefficientTrajectory plain_trajectory(const RegistrationConfig& cfg,
                                       const LevelSchedule& sched,
                                       const std::vector<double>& u,
                                       const MlpSpec& flow, const double* phi) {
  if (cfg.drmime_mode)
    return CoefficientTrajectory(static_cast<size_t>(cfg.levels), u);
  FlowField g = mlp_flow_field(flow, phi);
  if (is_masked(cfg)) {
    std::vector<double> m = mask_flat(cfg);
    FlowField inner = std::move(g);
    g = [inner, m](double s, const std::vector<double>& v) {
      std::vector<double> out = inner(s, v);
      for (size_t i = 0; i < out.size() && i < m.size(); ++i) out[i] *= m[i];
      return out;
    };
  }
  return cfg.solver == SolverKind::Euler ? euler_levels(u, g, sched)
                                         : rk4_levels(u, g, sched);
}

}  // namespace

TransformResult register_images(const Image& fixed, const Image& moving,
                                const RegistrationConfig& cfg) {
  cfg.validate();
  if (fixed.dims != moving.dims)
    throw Error::dim("registration: images differ in dimensionality");
  if (fixed.channels != moving.channels)
    throw Error::dim("registration: images differ in channel count");
  if (matrix_dim(cfg.group) != fixed.dims + 1)
    throw Error::dim("registration: group '" + group_name(cfg.group) +
                     "' does not act on " + std::to_string(fixed.dims) +
                     "-d images");

  ImagePyramid pyr_f = build_pyramid(fixed, cfg.levels, cfg.downscale);
  ImagePyramid pyr_m = build_pyramid(moving, cfg.levels, cfg.downscale);
  LevelSchedule sched = LevelSchedule::geometric(cfg.levels, cfg.downscale);

  int n_flat = flat_size(cfg.group, cfg.complex_coeffs);
  MlpSpec flow = flow_spec(n_flat);
  MlpSpec critic = critic_spec(fixed.channels);

  Rng rng(cfg.seed);
  ParameterTape params;
  params.add_segment("u", static_cast<size_t>(n_flat));  // starts at zero
  if (!cfg.drmime_mode) {
    params.add_segment("phi", flow.param_count());
    init_mlp(rng, flow, params.segment_values("phi"), /*zero_output_layer=*/true);
  }
  if (cfg.loss == LossKind::MINE) {
    params.add_segment("theta", critic.param_count());
    init_mlp(rng, critic, params.segment_values("theta"), /*zero_output_layer=*/false);
  }

  std::map<std::string, double> rates{{"u", cfg.lr_u}};
  if (params.has_segment("phi")) rates["phi"] = cfg.lr_phi;
  if (params.has_segment("theta")) rates["theta"] = cfg.lr_theta;
  std::map<std::string, double> warm_rates;
  if (params.has_segment("theta")) warm_rates["theta"] = cfg.lr_theta;
  int warmup = params.has_segment("theta") ? cfg.warmup_iters : 0;

  bool masked = is_masked(cfg);
  std::vector<double> mflat = mask_flat(cfg);

  std::vector<double> history;
  history.reserve(static_cast<size_t>(cfg.iterations));
  int iterations_run = 0;
  bool converged = false;

  for (int it = 0; it < cfg.iterations; ++it) {
    Tape t;
    Var u_leaf = t.leaf(Tensor::row(std::vector<double>(
        params.segment_values("u"), params.segment_values("u") + n_flat)));
    Var mask_const = masked ? t.constant(Tensor::row(mflat)) : Var{};
    Var u_used = masked ? t.mul(u_leaf, mask_const) : u_leaf;

    MlpVars flow_vars, critic_vars;
    std::vector<Var> traj;
    if (cfg.drmime_mode) {
      traj.assign(static_cast<size_t>(cfg.levels), u_used);
    } else {
      flow_vars = mlp_leaves(t, flow, params.segment_values("phi"));
      traj = integrate_levels_op(t, u_used, sched, cfg.solver, flow, flow_vars,
                                 mask_const);
    }

    ObjectiveSetup setup;
    setup.group = cfg.group;
    setup.complex_coeffs = cfg.complex_coeffs;
    setup.n_terms = cfg.n_terms;
    setup.loss = cfg.loss;
    setup.mine_batch = cfg.mine_batch;
    setup.rng = &rng;
    if (cfg.loss == LossKind::MINE) {
      critic_vars = mlp_leaves(t, critic, params.segment_values("theta"));
      setup.critic = &critic;
      setup.critic_vars = &critic_vars;
    }

    Var obj = symmetric_objective(t, pyr_f, pyr_m, traj, setup);
    double obj_val = t.val(obj).v[0];
    if (!std::isfinite(obj_val))
      throw Error::numeric("objective diverged at iteration " + std::to_string(it));
    history.push_back(obj_val);

    t.backward(t.neg(obj));
    params.zero_grads();
    {
      const Tensor& gu = t.grad(u_leaf);
      std::copy(gu.v.begin(), gu.v.end(), params.segment_grads("u"));
    }
    if (!cfg.drmime_mode)
      mlp_accumulate_grads(t, flow, flow_vars, params.segment_grads("phi"));
    if (cfg.loss == LossKind::MINE)
      mlp_accumulate_grads(t, critic, critic_vars, params.segment_grads("theta"));

    params.adam_step(it < warmup ? warm_rates : rates);
    iterations_run = it + 1;

    if (cfg.convergence_stop && it >= 50) {
      double cur = history.back();
      double old = history[static_cast<size_t>(it - 50)];
      if (std::abs(cur - old) < 1e-6 * std::max(1.0, std::abs(cur))) {
        converged = true;
        break;
      }
    }
  }

  // Final answer comes from a fresh pass outside the optimization tape so a
  // reloaded parameter set reproduces it exactly.
  std::vector<double> u_final(params.segment_values("u"),
                              params.segment_values("u") + n_flat);
  for (size_t i = 0; i < u_final.size(); ++i) u_final[i] *= mflat[i];
  TransformResult res;
  res.trajectory = plain_trajectory(
      cfg, sched, u_final, flow,
      cfg.drmime_mode ? nullptr : params.segment_values("phi"));
  CoefficientVector v1 =
      unflatten(res.trajectory[0].data(), cfg.group, cfg.complex_coeffs);
  ForwardInverse fi = forward_inverse(cfg.group, v1, cfg.n_terms);
  res.h = fi.h;
  res.h_inv = fi.h_inv;
  res.schedule = sched;
  res.loss_history = std::move(history);
  res.iterations_run = iterations_run;
  res.converged = converged;
  res.group = cfg.group;
  res.complex_coeffs = cfg.complex_coeffs;
  res.solver = cfg.solver;
  res.loss = cfg.loss;
  res.n_terms = cfg.n_terms;
  res.downscale = cfg.downscale;
  res.seed = cfg.seed;
  res.mask = cfg.mask.empty() ? full_mask(cfg.group) : cfg.mask;
  res.drmime_mode = cfg.drmime_mode;
  res.mine_batch = cfg.mine_batch;
  res.fixed_dims = {fixed.width, fixed.height};
  res.moving_dims = {moving.width, moving.height};
  if (fixed.dims == 3) {
    res.fixed_dims.push_back(fixed.depth);
    res.moving_dims.push_back(moving.depth);
  }
  res.channels = fixed.channels;
  if (cfg.emit_params) res.params_checkpoint = params.checkpoint_json();
  return res;
}

namespace {

ordered_json mat_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json cmat_json(const ComplexMatrix& m) {
  ordered_json j;
  j["re"] = mat_json(m.re);
  j["im"] = mat_json(m.im);
  return j;
}

Eigen::MatrixXd mat_from_json(const ordered_json& j) {
  if (!j.is_array() || j.empty()) throw Error::invalid("result JSON: bad matrix");
  Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const ordered_json& row = j.at(static_cast<size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw Error::invalid("result JSON: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = row.at(static_cast<size_t>(c)).get<double>();
  }
  return m;
}

ComplexMatrix cmat_from_json(const ordered_json& j) {
  ComplexMatrix m(mat_from_json(j.at("re")), mat_from_json(j.at("im")));
  return m;
}

}  // namespace

std::string result_json(const TransformResult& r) {
  int ng = n_generators(r.group);
  ordered_json j;
  j["group"] = group_name(r.group);
  j["complex"] = r.complex_coeffs;
  j["solver"] = solver_name(r.solver);
  j["loss"] = loss_name(r.loss);
  j["levels"] = r.schedule.levels();
  j["downscale"] = r.downscale;
  j["n_terms"] = r.n_terms;
  j["seed"] = r.seed;
  j["drmime"] = r.drmime_mode;
  j["mine_batch"] = r.mine_batch;
  ordered_json mask = ordered_json::array();
  for (bool b : r.mask) mask.push_back(b ? 1 : 0);
  j["mask"] = std::move(mask);
  j["iterations"] = r.iterations_run;
  j["converged"] = r.converged;
  j["fixed_dims"] = r.fixed_dims;
  j["moving_dims"] = r.moving_dims;
  j["channels"] = r.channels;
  j["H"] = cmat_json(r.h);
  j["H_inv"] = cmat_json(r.h_inv);
  ordered_json traj = ordered_json::array();
  for (size_t l = 0; l < r.trajectory.size(); ++l) {
    CoefficientVector v =
        unflatten(r.trajectory[l].data(), r.group, r.complex_coeffs);
    ordered_json entry;
    entry["level"] = static_cast<int>(l + 1);
    entry["s"] = r.schedule.scales[l];
    ordered_json re = ordered_json::array(), im = ordered_json::array();
    for (int k = 0; k < ng; ++k) {
      re.push_back(v.re[k]);
      im.push_back(v.im[k]);
    }
    entry["re"] = std::move(re);
    entry["im"] = std::move(im);
    traj.push_back(std::move(entry));
  }
  j["trajectory"] = std::move(traj);
  j["loss_history"] = r.loss_history;
  return j.dump(2) + "\n";
}

TransformResult result_from_json(const std::string& text) {
  try {
    ordered_json j = ordered_json::parse(text);
    TransformResult r;
    r.group = parse_group(j.at("group").get<std::string>());
    r.complex_coeffs = j.at("complex").get<bool>();
    r.solver = parse_solver(j.at("solver").get<std::string>());
    r.loss = parse_loss(j.at("loss").get<std::string>());
    int levels = j.at("levels").get<int>();
    r.downscale = j.at("downscale").get<double>();
    r.n_terms = j.at("n_terms").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.drmime_mode = j.at("drmime").get<bool>();
    r.mine_batch = j.at("mine_batch").get<int>();
    for (const auto& b : j.at("mask")) r.mask.push_back(b.get<int>() != 0);
    r.iterations_run = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.fixed_dims = j.at("fixed_dims").get<std::vector<int>>();
    r.moving_dims = j.at("moving_dims").get<std::vector<int>>();
    r.channels = j.at("channels").get<int>();
    r.h = cmat_from_json(j.at("H"));
    r.h_inv = cmat_from_json(j.at("H_inv"));
    int d = matrix_dim(r.group);
    if (r.h.re.rows() != d || r.h.re.cols() != d || r.h.im.rows() != d ||
        r.h_inv.re.rows() != d || r.h_inv.im.cols() != d)
      throw Error::invalid("result JSON: matrix size does not match group");
    int ng = n_generators(r.group);
    for (const auto& entry : j.at("trajectory")) {
      CoefficientVector v = CoefficientVector::zero(r.group);
      const auto& re = entry.at("re");
      const auto& im = entry.at("im");
      if (static_cast<int>(re.size()) != ng || static_cast<int>(im.size()) != ng)
        throw Error::invalid("result JSON: trajectory width does not match group");
      for (int k = 0; k < ng; ++k) {
        v.re[k] = re.at(static_cast<size_t>(k)).get<double>();
        v.im[k] = im.at(static_cast<size_t>(k)).get<double>();
      }
      r.trajectory.push_back(flatten(v, r.complex_coeffs));
      r.schedule.scales.push_back(entry.at("s").get<double>());
    }
    if (static_cast<int>(r.trajectory.size()) != levels)
      throw Error::invalid("result JSON: level count does not match trajectory");
    r.loss_history = j.at("loss_history").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error::invalid(std::string("malformed result JSON: ") + e.what());
  }
}

void save_result(const std::string& path, const TransformResult& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  out << result_json(r);
  if (!out.flush()) throw Error::io("failed writing '" + path + "'");
}

TransformResult load_result(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return result_from_json(ss.str());
}

}  // namespace odecme
