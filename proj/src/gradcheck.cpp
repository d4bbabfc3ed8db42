// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/gradcheck.hpp"

#include <cmath>
#include <cstring>

#include "odecme/geometry.hpp"
#include "odecme/imaging.hpp"
#include "odecme/lie_basis.hpp"
#include "odecme/losses.hpp"
#include "odecme/matexp.hpp"
#include "odecme/metrics.hpp"
#include "odecme/mlp.hpp"
#include "odecme/odeflow.hpp"
#include "odecme/rng.hpp"
#include "odecme/tape.hpp"

namespace odecme {

GradReport run_gradcheck(const GradCase& c) {
  GradReport rep;
  rep.name = c.name;
  rep.n_in = static_cast<int>(c.x0.size());
  rep.n_out = c.n_out;
  rep.tol = c.tol;
  if (!c.value || !c.grad) throw Error::invalid("gradcheck: case lacks callbacks");

  std::vector<std::vector<double>> jn(static_cast<size_t>(c.n_out),
                                      std::vector<double>(c.x0.size()));
  std::vector<double> x = c.x0;
  for (size_t i = 0; i < c.x0.size(); ++i) {
    x[i] = c.x0[i] + c.step;
    std::vector<double> fp = c.value(x);
    x[i] = c.x0[i] - c.step;
    std::vector<double> fm = c.value(x);
    x[i] = c.x0[i];
    if (static_cast<int>(fp.size()) != c.n_out || fm.size() != fp.size())
      throw Error::dim("gradcheck '" + c.name + "': value() output count");
    for (int j = 0; j < c.n_out; ++j)
      jn[static_cast<size_t>(j)][i] = (fp[static_cast<size_t>(j)] -
                                       fm[static_cast<size_t>(j)]) /
                                      (2.0 * c.step);
  }

  for (int j = 0; j < c.n_out; ++j) {
    std::vector<double> ja = c.grad(c.x0, j);
    if (ja.size() != c.x0.size())
      throw Error::dim("gradcheck '" + c.name + "': grad() input count");
    for (size_t i = 0; i < ja.size(); ++i) {
      double a = ja[i], n = jn[static_cast<size_t>(j)][i];
      double err = std::abs(a - n);
      if (err <= c.abs_floor) continue;
      double rel = err / std::max(std::abs(a), std::abs(n));
      if (rel > rep.worst_rel) {
        rep.worst_rel = rel;
        rep.worst_in = static_cast<int>(i);
        rep.worst_out = j;
      }
    }
  }
  rep.pass = rep.worst_rel < c.tol;
  return rep;
}

namespace {

std::vector<GradCase>& registry() {
  static std::vector<GradCase> cases;
  return cases;
}

Tensor tensor_from(const std::vector<double>& x, size_t off, int r, int c) {
  Tensor t(r, c);
  std::memcpy(t.v.data(), x.data() + off, t.v.size() * sizeof(double));
  return t;
}

void append_tensor(std::vector<double>& out, const Tensor& t) {
  out.insert(out.end(), t.v.begin(), t.v.end());
}

std::vector<double> rand_vec(Rng& rng, size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// sum(m .* w): scalarizes a tensor output with a fixed probe.
Var probe_sum(Tape& t, Var m, const Tensor& w) {
  return t.sum(t.mul(m, t.constant(w)));
}

Tensor rand_probe(Rng& rng, int r, int c) {
  Tensor w(r, c);
  for (double& x : w.v) x = rng.uniform(-1.0, 1.0);
  return w;
}

// --- generic builders -------------------------------------------------------

// Scalar-valued case over tensor inputs described by (rows, cols) blocks.
struct Block {
  int rows, cols;
};

GradCase blocks_case(std::string name,
                     std::vector<Block> blocks, std::vector<double> x0,
                     std::function<Var(Tape&, const std::vector<Var>&)> build) {
  GradCase c;
  c.name = std::move(name);
  c.x0 = std::move(x0);
  auto eval = [blocks, build](const std::vector<double>& x, bool want_grad,
                              std::vector<double>* g) {
    Tape t;
    std::vector<Var> vars;
    size_t off = 0;
    for (const Block& b : blocks) {
      vars.push_back(t.leaf(tensor_from(x, off, b.rows, b.cols)));
      off += static_cast<size_t>(b.rows) * b.cols;
    }
    Var out = build(t, vars);
    double v = t.val(out).v[0];
    if (want_grad) {
      t.backward(out);
      g->clear();
      for (Var p : vars) append_tensor(*g, t.grad(p));
    }
    return v;
  };
  c.value = [eval](const std::vector<double>& x) {
    return std::vector<double>{eval(x, false, nullptr)};
  };
  c.grad = [eval](const std::vector<double>& x, int) {
    std::vector<double> g;
    eval(x, true, &g);
    return g;
  };
  return c;
}

// Full-Jacobian case: build() returns the list of output tensors; every
// entry of every output is checked against every input entry.
GradCase jacobian_case(
    std::string name, std::vector<Block> blocks, std::vector<double> x0,
    std::function<std::vector<Var>(Tape&, const std::vector<Var>&)> build) {
  GradCase c;
  c.name = std::move(name);
  c.x0 = std::move(x0);
  auto record = [blocks, build](const std::vector<double>& x, Tape& t,
                                std::vector<Var>& ins) {
    size_t off = 0;
    for (const Block& b : blocks) {
      ins.push_back(t.leaf(tensor_from(x, off, b.rows, b.cols)));
      off += static_cast<size_t>(b.rows) * b.cols;
    }
    return build(t, ins);
  };
  {
    Tape t;
    std::vector<Var> ins;
    std::vector<Var> outs = record(c.x0, t, ins);
    int n = 0;
    for (Var o : outs) n += static_cast<int>(t.val(o).v.size());
    c.n_out = n;
  }
  c.value = [record](const std::vector<double>& x) {
    Tape t;
    std::vector<Var> ins;
    std::vector<Var> outs = record(x, t, ins);
    std::vector<double> v;
    for (Var o : outs) append_tensor(v, t.val(o));
    return v;
  };
  c.grad = [record](const std::vector<double>& x, int j) {
    Tape t;
    std::vector<Var> ins;
    std::vector<Var> outs = record(x, t, ins);
    // pick the j-th output entry with a one-hot probe
    int seen = 0;
    Var root;
    for (Var o : outs) {
      const Tensor& tv = t.val(o);
      int n = static_cast<int>(tv.v.size());
      if (j < seen + n) {
        Tensor onehot(tv.rows, tv.cols);
        onehot.v[static_cast<size_t>(j - seen)] = 1.0;
        root = t.sum(t.mul(o, t.constant(std::move(onehot))));
        break;
      }
      seen += n;
    }
    t.backward(root);
    std::vector<double> g;
    for (Var p : ins) {
      if (t.requires_grad(p))
        append_tensor(g, t.grad(p));
    }
    return g;
  };
  return c;
}

// --- tape primitive cases ---------------------------------------------------

void register_tape_cases() {
  Rng rng(101);
  auto bin = [&](const char* name, std::function<Var(Tape&, Var, Var)> op,
                 double lo_b = -1.0, double hi_b = 1.0) {
    std::vector<double> x0 = rand_vec(rng, 12, -1.0, 1.0);
    std::vector<double> b0 = rand_vec(rng, 12, lo_b, hi_b);
    x0.insert(x0.end(), b0.begin(), b0.end());
    Tensor w = rand_probe(rng, 3, 4);
    register_grad_case(blocks_case(
        name, {{3, 4}, {3, 4}}, std::move(x0),
        [op, w](Tape& t, const std::vector<Var>& v) {
          return probe_sum(t, op(t, v[0], v[1]), w);
        }));
  };
  bin("tape-add", [](Tape& t, Var a, Var b) { return t.add(a, b); });
  bin("tape-sub", [](Tape& t, Var a, Var b) { return t.sub(a, b); });
  bin("tape-mul", [](Tape& t, Var a, Var b) { return t.mul(a, b); });
  bin("tape-div", [](Tape& t, Var a, Var b) { return t.div(a, b); }, 0.5, 1.5);
  bin("tape-add-scaled",
      [](Tape& t, Var a, Var b) { return t.add_scaled(a, b, -0.7); });

  auto un = [&](const char* name, std::function<Var(Tape&, Var)> op, double lo,
                double hi) {
    Tensor w = rand_probe(rng, 3, 4);
    register_grad_case(blocks_case(
        name, {{3, 4}}, rand_vec(rng, 12, lo, hi),
        [op, w](Tape& t, const std::vector<Var>& v) {
          return probe_sum(t, op(t, v[0]), w);
        }));
  };
  un("tape-neg", [](Tape& t, Var a) { return t.neg(a); }, -1, 1);
  un("tape-scale", [](Tape& t, Var a) { return t.scale(a, 1.7); }, -1, 1);
  un("tape-add-scalar", [](Tape& t, Var a) { return t.add_scalar(a, 0.3); }, -1, 1);
  un("tape-sqrt", [](Tape& t, Var a) { return t.sqrt(a); }, 0.5, 2.0);
  un("tape-square", [](Tape& t, Var a) { return t.square(a); }, -1, 1);
  // relu: keep inputs away from the kink
  {
    std::vector<double> x0 = rand_vec(rng, 12, 0.2, 1.0);
    for (size_t i = 0; i < x0.size(); i += 2) x0[i] = -x0[i];
    Tensor w = rand_probe(rng, 3, 4);
    register_grad_case(blocks_case("tape-relu", {{3, 4}}, std::move(x0),
                                   [w](Tape& t, const std::vector<Var>& v) {
                                     return probe_sum(t, t.relu(v[0]), w);
                                   }));
  }

  {
    std::vector<double> x0 = rand_vec(rng, 6 + 12, -1.0, 1.0);
    Tensor w = rand_probe(rng, 2, 4);
    register_grad_case(blocks_case("tape-matmul", {{2, 3}, {3, 4}}, std::move(x0),
                                   [w](Tape& t, const std::vector<Var>& v) {
                                     return probe_sum(t, t.matmul(v[0], v[1]), w);
                                   }));
  }
  {
    std::vector<double> x0 = rand_vec(rng, 12 + 4, -1.0, 1.0);
    Tensor w = rand_probe(rng, 3, 4);
    register_grad_case(blocks_case(
        "tape-add-rowvec", {{3, 4}, {1, 4}}, std::move(x0),
        [w](Tape& t, const std::vector<Var>& v) {
          return probe_sum(t, t.add_rowvec(v[0], v[1]), w);
        }));
  }
  register_grad_case(blocks_case("tape-sum", {{3, 4}}, rand_vec(rng, 12, -1, 1),
                                 [](Tape& t, const std::vector<Var>& v) {
                                   return t.sum(v[0]);
                                 }));
  register_grad_case(blocks_case("tape-mean", {{3, 4}}, rand_vec(rng, 12, -1, 1),
                                 [](Tape& t, const std::vector<Var>& v) {
                                   return t.mean(v[0]);
                                 }));
  register_grad_case(blocks_case("tape-log-mean-exp", {{6, 1}},
                                 rand_vec(rng, 6, -2, 2),
                                 [](Tape& t, const std::vector<Var>& v) {
                                   return t.log_mean_exp(v[0]);
                                 }));
  {
    Tensor w = rand_probe(rng, 3, 4);
    register_grad_case(blocks_case("tape-reshape", {{2, 6}},
                                   rand_vec(rng, 12, -1, 1),
                                   [w](Tape& t, const std::vector<Var>& v) {
                                     return probe_sum(t, t.reshape(v[0], 3, 4), w);
                                   }));
  }
  {
    Tensor w = rand_probe(rng, 3, 2);
    register_grad_case(blocks_case(
        "tape-slice-cols", {{3, 5}}, rand_vec(rng, 15, -1, 1),
        [w](Tape& t, const std::vector<Var>& v) {
          return probe_sum(t, t.slice_cols(v[0], 1, 2), w);
        }));
  }
  {
    Tensor w = rand_probe(rng, 2, 5);
    register_grad_case(blocks_case(
        "tape-concat-cols", {{2, 3}, {2, 2}}, rand_vec(rng, 10, -1, 1),
        [w](Tape& t, const std::vector<Var>& v) {
          return probe_sum(t, t.concat_cols(v[0], v[1]), w);
        }));
  }
  {
    std::vector<int> idx{3, 0, 2, 0};  // repeat checks scatter-add
    Tensor w = rand_probe(rng, 4, 3);
    register_grad_case(blocks_case(
        "tape-gather-rows", {{4, 3}}, rand_vec(rng, 12, -1, 1),
        [idx, w](Tape& t, const std::vector<Var>& v) {
          return probe_sum(t, t.gather_rows(v[0], idx), w);
        }));
  }
}

// --- algebra / transform cases ----------------------------------------------

void register_algebra_cases() {
  Rng rng(202);

  // assemble + mexp, full Jacobian, both groups of matrix size 3 and 4
  for (GroupSpec g : {GroupSpec::Aff2, GroupSpec::Sim3}) {
    int d = matrix_dim(g);
    std::string name = std::string("mexp-") + group_name(g);
    std::vector<double> x0 = rand_vec(rng, static_cast<size_t>(2 * d * d), -0.1, 0.1);
    register_grad_case(jacobian_case(
        name, {{d, d}, {d, d}}, std::move(x0),
        [](Tape& t, const std::vector<Var>& v) {
          TapeComplexMatrix h = mexp_op(t, {v[0], v[1]});
          return std::vector<Var>{h.re, h.im};
        }));
  }

  {
    std::vector<double> x0 = rand_vec(rng, 4 * 9, -0.5, 0.5);
    register_grad_case(jacobian_case(
        "complex-matmul", {{3, 3}, {3, 3}, {3, 3}, {3, 3}}, std::move(x0),
        [](Tape& t, const std::vector<Var>& v) {
          TapeComplexMatrix p = complex_matmul_op(t, {v[0], v[1]}, {v[2], v[3]});
          return std::vector<Var>{p.re, p.im};
        }));
  }

  // point transform: H near a small exponential, gradients to H and points
  for (int k : {2, 3}) {
    int d = k + 1;
    GroupSpec g = k == 2 ? GroupSpec::Aff2 : GroupSpec::Sim3;
    CoefficientVector v = CoefficientVector::zero(g);
    for (int i = 0; i < v.size(); ++i) {
      v.re[i] = 0.1 * rng.normal();
      v.im[i] = 0.1 * rng.normal();
    }
    ComplexMatrix h = mexp(assemble(g, v));
    std::vector<double> x0;
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) x0.push_back(h.re(r, c));
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) x0.push_back(h.im(r, c));
    std::vector<double> pts = rand_vec(rng, static_cast<size_t>(4 * k), -0.8, 0.8);
    x0.insert(x0.end(), pts.begin(), pts.end());
    register_grad_case(jacobian_case(
        "transform-points-" + std::to_string(k) + "d", {{d, d}, {d, d}, {4, k}},
        std::move(x0), [](Tape& t, const std::vector<Var>& v) {
          return std::vector<Var>{transform_points_op(t, {v[0], v[1]}, v[2])};
        }));
  }
}

// --- warp cases ---------------------------------------------------------

void register_warp_cases() {
  Rng rng(303);

  {
    Image img = make_test_image(8, 8, 1, 1, 17);
    std::vector<double> x0(12);
    for (double& x : x0) x = 0.05 * rng.normal();
    Tensor w = rand_probe(rng, 64, 1);
    GradCase c = blocks_case(
        "warp-2d", {{1, 12}}, std::move(x0),
        [img, w](Tape& t, const std::vector<Var>& v) {
          TapeComplexMatrix b = assemble_op(t, GroupSpec::Aff2, v[0], true);
          TapeComplexMatrix h = mexp_op(t, b);
          return probe_sum(t, warp_op(t, img, h, 8, 8, 1), w);
        });
    c.step = 1e-6;
    c.tol = 1e-3;  // interpolation kinks
    register_grad_case(std::move(c));
  }
  {
    Image img = make_test_image(6, 6, 6, 1, 29);
    std::vector<double> x0(14);
    for (double& x : x0) x = 0.04 * rng.normal();
    Tensor w = rand_probe(rng, 216, 1);
    GradCase c = blocks_case(
        "warp-3d", {{1, 14}}, std::move(x0),
        [img, w](Tape& t, const std::vector<Var>& v) {
          TapeComplexMatrix b = assemble_op(t, GroupSpec::Sim3, v[0], true);
          TapeComplexMatrix h = mexp_op(t, b);
          return probe_sum(t, warp_op(t, img, h, 6, 6, 6), w);
        });
    c.step = 1e-6;
    c.tol = 1e-3;
    register_grad_case(std::move(c));
  }
}

// --- MLP and ODE cases --------------------------------------------------

void register_flow_cases() {
  Rng rng(404);

  {
    MlpSpec spec{7, {100}, 6};
    std::vector<double> params(spec.param_count());
    init_mlp(rng, spec, params.data(), /*zero_output_layer=*/false);
    std::vector<double> x0 = rand_vec(rng, 7, -1.0, 1.0);
    x0.insert(x0.end(), params.begin(), params.end());
    std::vector<Block> blocks{{1, 7}};
    std::vector<int> w = spec.widths();
    for (size_t l = 0; l + 1 < w.size(); ++l) {
      blocks.push_back({w[l], w[l + 1]});
      blocks.push_back({1, w[l + 1]});
    }
    register_grad_case(jacobian_case(
        "mlp-jacobian", blocks, std::move(x0),
        [spec](Tape& t, const std::vector<Var>& v) {
          MlpVars mv;
          for (size_t i = 1; i < v.size(); i += 2) {
            mv.weights.push_back(v[i]);
            mv.biases.push_back(v[i + 1]);
          }
          return std::vector<Var>{mlp_apply(t, spec, mv, v[0])};
        }));
  }

  for (SolverKind kind : {SolverKind::Euler, SolverKind::RK4}) {
    MlpSpec flow{4, {8}, 3};
    std::vector<double> params(flow.param_count());
    init_mlp(rng, flow, params.data(), /*zero_output_layer=*/false);
    std::vector<double> x0 = rand_vec(rng, 3, -0.3, 0.3);
    x0.insert(x0.end(), params.begin(), params.end());
    std::vector<Block> blocks{{1, 3}, {4, 8}, {1, 8}, {8, 3}, {1, 3}};
    LevelSchedule sched = LevelSchedule::geometric(3, 2.0);
    register_grad_case(jacobian_case(
        std::string("ode-") + solver_name(kind), blocks, std::move(x0),
        [flow, sched, kind](Tape& t, const std::vector<Var>& v) {
          MlpVars mv;
          mv.weights = {v[1], v[3]};
          mv.biases = {v[2], v[4]};
          return integrate_levels_op(t, v[0], sched, kind, flow, mv);
        }));
  }
}

// --- loss cases -----------------------------------------------------------

void register_loss_cases() {
  Rng rng(505);

  {
    std::vector<double> x0 = rand_vec(rng, 64, 0.0, 1.0);
    register_grad_case(blocks_case("mse", {{16, 2}, {16, 2}}, std::move(x0),
                                   [](Tape& t, const std::vector<Var>& v) {
                                     return mse_op(t, v[0], v[1]);
                                   }));
  }
  {
    std::vector<double> x0 = rand_vec(rng, 64, 0.0, 1.0);
    register_grad_case(blocks_case("ncc", {{16, 2}, {16, 2}}, std::move(x0),
                                   [](Tape& t, const std::vector<Var>& v) {
                                     return ncc_op(t, v[0], v[1]);
                                   }));
  }
  {
    MlpSpec critic{2, {8, 8}, 1};
    std::vector<double> theta(critic.param_count());
    init_mlp(rng, critic, theta.data(), /*zero_output_layer=*/false);
    Rng batch_rng(7);
    SampleBatch batch = draw_batch(batch_rng, 32, 16);
    std::vector<double> x0 = rand_vec(rng, 64, 0.0, 1.0);
    x0.insert(x0.end(), theta.begin(), theta.end());
    std::vector<Block> blocks{{32, 1}, {32, 1}, {2, 8}, {1, 8}, {8, 8}, {1, 8},
                              {8, 1}, {1, 1}};
    GradCase c = blocks_case(
        "mine", blocks, std::move(x0),
        [critic, batch](Tape& t, const std::vector<Var>& v) {
          MlpVars mv;
          mv.weights = {v[2], v[4], v[6]};
          mv.biases = {v[3], v[5], v[7]};
          return mine_op(t, v[0], v[1], critic, mv, batch);
        });
    c.step = 1e-6;
    c.tol = 1e-3;  // critic ReLU kinks
    register_grad_case(std::move(c));
  }
}

// --- end-to-end objective cases ----------------------------------------------

// Shared 16x16 two-level instance. Flow keeps the production width; MINE
// uses a narrow critic so the numeric sweep stays fast.
struct E2eFixture {
  ImagePyramid pf, pm;
  LevelSchedule sched = LevelSchedule::geometric(2, 2.0);
  GroupSpec group = GroupSpec::Aff2;
  int n_flat = 12;
  MlpSpec flow;
  MlpSpec critic{2, {8, 8}, 1};
  std::vector<SampleBatch> batches;
};

const E2eFixture& e2e_fixture() {
  static E2eFixture* fx = [] {
    auto* f = new E2eFixture;
    Image img = make_test_image(16, 16, 1, 1, 11);
    SynthPair sp = synth_pair(img, GroupSpec::Aff2, 0.03, 0.0, 23);
    f->pf = build_pyramid(sp.fixed, 2, 2.0);
    f->pm = build_pyramid(sp.moving, 2, 2.0);
    f->flow = flow_spec(f->n_flat);
    Rng rng(31);
    f->batches.push_back(draw_batch(rng, f->pf.levels[0].n_pixels(), 32));
    f->batches.push_back(draw_batch(rng, f->pm.levels[0].n_pixels(), 32));
    f->batches.push_back(draw_batch(rng, f->pf.levels[1].n_pixels(), 16));
    f->batches.push_back(draw_batch(rng, f->pm.levels[1].n_pixels(), 16));
    return f;
  }();
  return *fx;
}

GradCase e2e_case(LossKind loss) {
  const E2eFixture& fx = e2e_fixture();
  bool mine = loss == LossKind::MINE;

  // Seed picked so no ReLU pre-activation sits within the probe step of
  // zero anywhere along the trajectory; a crossed kink turns the central
  // difference into an O(1) artifact that says nothing about the tape.
  Rng rng(610);
  std::vector<double> x0(static_cast<size_t>(fx.n_flat));
  for (double& x : x0) x = 0.02 * rng.normal();
  std::vector<double> phi(fx.flow.param_count());
  init_mlp(rng, fx.flow, phi.data(), /*zero_output_layer=*/false);
  x0.insert(x0.end(), phi.begin(), phi.end());
  size_t theta_off = x0.size();
  if (mine) {
    std::vector<double> theta(fx.critic.param_count());
    init_mlp(rng, fx.critic, theta.data(), /*zero_output_layer=*/false);
    x0.insert(x0.end(), theta.begin(), theta.end());
  }

  auto eval = [&fx, loss, mine, theta_off](const std::vector<double>& x,
                                           std::vector<double>* g) {
    Tape t;
    Var u = t.leaf(tensor_from(x, 0, 1, fx.n_flat));
    MlpVars fv = mlp_leaves(t, fx.flow, x.data() + fx.n_flat);
    std::vector<Var> traj =
        integrate_levels_op(t, u, fx.sched, SolverKind::RK4, fx.flow, fv);
    MlpVars cv;
    ObjectiveSetup setup;
    setup.group = fx.group;
    setup.complex_coeffs = true;
    setup.loss = loss;
    if (mine) {
      cv = mlp_leaves(t, fx.critic, x.data() + theta_off);
      setup.critic = &fx.critic;
      setup.critic_vars = &cv;
      setup.fixed_batches = &fx.batches;
    }
    Var obj = symmetric_objective(t, fx.pf, fx.pm, traj, setup);
    double v = t.val(obj).v[0];
    if (g) {
      t.backward(obj);
      g->assign(x.size(), 0.0);
      const Tensor& gu = t.grad(u);
      std::copy(gu.v.begin(), gu.v.end(), g->begin());
      mlp_accumulate_grads(t, fx.flow, fv, g->data() + fx.n_flat);
      if (mine) mlp_accumulate_grads(t, fx.critic, cv, g->data() + theta_off);
    }
    return v;
  };

  GradCase c;
  c.name = std::string("objective-16x16-L2-") + loss_name(loss);
  c.x0 = std::move(x0);
  c.step = 2e-5;
  c.tol = 1e-2;
  c.abs_floor = 1e-7;
  c.value = [eval](const std::vector<double>& x) {
    return std::vector<double>{eval(x, nullptr)};
  };
  c.grad = [eval](const std::vector<double>& x, int) {
    std::vector<double> g;
    eval(x, &g);
    return g;
  };
  return c;
}

void register_objective_cases() {
  register_grad_case(e2e_case(LossKind::MSE));
  register_grad_case(e2e_case(LossKind::NCC));
  register_grad_case(e2e_case(LossKind::MINE));
}

void build_builtin_cases() {
  register_tape_cases();
  register_algebra_cases();
  register_warp_cases();
  register_flow_cases();
  register_loss_cases();
  register_objective_cases();
}

}  // namespace

void register_grad_case(GradCase c) { registry().push_back(std::move(c)); }

const std::vector<GradCase>& registered_grad_cases() {
  static bool built = [] {
    build_builtin_cases();
    return true;
  }();
  (void)built;
  return registry();
}

}  // namespace odecme
