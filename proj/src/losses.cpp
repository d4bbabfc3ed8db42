// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/losses.hpp"

#include <cmath>
#include <cstdio>

#include "odecme/error.hpp"
#include "odecme/matexp.hpp"

namespace odecme {

LossKind parse_loss(const std::string& name) {
  if (name == "mine") return LossKind::MINE;
  if (name == "mse") return LossKind::MSE;
  if (name == "ncc") return LossKind::NCC;
  throw Error::invalid("unknown loss '" + name + "' (expected mine, mse or ncc)");
}

std::string loss_name(LossKind k) {
  switch (k) {
    case LossKind::MINE: return "mine";
    case LossKind::MSE: return "mse";
    case LossKind::NCC: return "ncc";
  }
  throw Error::invalid("bad LossKind");
}

SampleBatch draw_batch(Rng& rng, long n_pixels, int n) {
  if (n < 1) throw Error::invalid("draw_batch: batch size must be positive");
  if (n > n_pixels)
    throw Error::invalid("draw_batch: batch of " + std::to_string(n) + " exceeds " +
                         std::to_string(n_pixels) + " pixels");
  SampleBatch b;
  b.indices = rng.sample_without_replacement(static_cast<int>(n_pixels), n);
  std::vector<int> sigma = rng.permutation(n);
  b.permuted.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    b.permuted[static_cast<size_t>(i)] = b.indices[static_cast<size_t>(sigma[i])];
  return b;
}

int default_mine_batch(long level_pixels) {
  long n = std::min<long>(4096, level_pixels / 10);
  return static_cast<int>(std::max<long>(2, std::min(n, level_pixels)));
}

Var mine_op(Tape& t, Var p, Var q, const MlpSpec& critic, const MlpVars& vars,
            const SampleBatch& batch) {
  const Tensor& tp = t.val(p);
  const Tensor& tq = t.val(q);
  if (!tq.same_shape(tp)) throw Error::dim("mine: images differ in pixel count or channels");
  if (batch.size() < 1) throw Error::invalid("mine: empty batch");
  if (batch.permuted.size() != batch.indices.size())
    throw Error::invalid("mine: malformed batch");
  if (critic.input != 2 * tp.cols)
    throw Error::dim("mine: critic expects " + std::to_string(critic.input) +
                     " inputs, images provide " + std::to_string(2 * tp.cols));

  Var p_rows = t.gather_rows(p, batch.indices);
  Var joint = t.concat_cols(p_rows, t.gather_rows(q, batch.indices));
  Var marginal = t.concat_cols(p_rows, t.gather_rows(q, batch.permuted));
  Var joint_score = t.mean(mlp_apply(t, critic, vars, joint));
  Var marginal_score = t.log_mean_exp(mlp_apply(t, critic, vars, marginal));
  return t.sub(joint_score, marginal_score);
}

Var mse_op(Tape& t, Var q, Var ref) {
  const Tensor& tq = t.val(q);
  const Tensor& tref = t.val(ref);
  if (!tq.same_shape(tref)) throw Error::dim("mse: shape mismatch");
  double n = static_cast<double>(tref.size());
  double acc = 0.0;
  for (size_t i = 0; i < tref.v.size(); ++i) {
    double d = tq.v[i] - tref.v[i];
    acc += d * d;
  }
  Tensor value = Tensor::scalar(acc / n);
  auto back = [&t, q, ref, n](const Tensor& gout, const Tape::GradSink& accum) {
    const Tensor& vq = t.val(q);
    const Tensor& vref = t.val(ref);
    Tensor gq(vq.rows, vq.cols);
    double c = 2.0 * gout.v[0] / n;
    for (size_t i = 0; i < gq.v.size(); ++i) gq.v[i] = c * (vq.v[i] - vref.v[i]);
    accum(0, gq);
    if (t.requires_grad(ref)) {
      Tensor gr(vq.rows, vq.cols);
      for (size_t i = 0; i < gr.v.size(); ++i) gr.v[i] = -c * (vq.v[i] - vref.v[i]);
      accum(1, gr);
    }
  };
  return t.custom(std::move(value), {q, ref}, back);
}

namespace {

struct NccChannel {
  double mean_p = 0.0, mean_q = 0.0, var_p = 0.0, var_q = 0.0, cov = 0.0, r = 0.0;
  bool degenerate = false;
};

NccChannel ncc_channel(const Tensor& q, const Tensor& ref, int c) {
  NccChannel st;
  int n = q.rows;
  for (int i = 0; i < n; ++i) {
    st.mean_p += ref.at(i, c);
    st.mean_q += q.at(i, c);
  }
  st.mean_p /= n;
  st.mean_q /= n;
  for (int i = 0; i < n; ++i) {
    double a = ref.at(i, c) - st.mean_p;
    double b = q.at(i, c) - st.mean_q;
    st.var_p += a * a;
    st.var_q += b * b;
    st.cov += a * b;
  }
  constexpr double kVarEps = 1e-24;
  if (st.var_p <= kVarEps || st.var_q <= kVarEps) {
    st.degenerate = true;
    st.r = 0.0;
  } else {
    st.r = st.cov / std::sqrt(st.var_p * st.var_q);
  }
  return st;
}

void warn_degenerate_once() {
  static bool warned = false;
  if (!warned) {
    std::fprintf(stderr, "warning: zero-variance channel in ncc; correlation taken as 0\n");
    warned = true;
  }
}

}  // namespace

Var ncc_op(Tape& t, Var q, Var ref) {
  const Tensor& tq = t.val(q);
  const Tensor& tref = t.val(ref);
  if (!tq.same_shape(tref)) throw Error::dim("ncc: shape mismatch");
  if (tq.rows < 2) throw Error::invalid("ncc: need at least two pixels");
  int channels = tref.cols;
  double value = 0.0;
  bool any_degenerate = false;
  for (int c = 0; c < channels; ++c) {
    NccChannel st = ncc_channel(tq, tref, c);
    any_degenerate = any_degenerate || st.degenerate;
    value += st.r;
  }
  if (any_degenerate) warn_degenerate_once();
  value /= channels;

  auto back = [&t, q, ref, channels](const Tensor& gout, const Tape::GradSink& accum) {
    const Tensor& vq = t.val(q);
    const Tensor& vref = t.val(ref);
    bool want_ref = t.requires_grad(ref);
    Tensor gq(vq.rows, vq.cols);
    Tensor gref(vref.rows, vref.cols);
    double g = gout.v[0] / channels;
    for (int c = 0; c < channels; ++c) {
      NccChannel st = ncc_channel(vq, vref, c);
      if (st.degenerate) continue;
      // d r / d q_i = (a_i - (cov/var_q) b_i) / sqrt(var_p var_q), where
      // a_i, b_i are the centered intensities; the means' contribution
      // cancels because sum a_i = 0. The ref side mirrors it with the
      // roles swapped.
      double inv = 1.0 / std::sqrt(st.var_p * st.var_q);
      double ratio = st.cov / st.var_q;
      double ratio_p = st.cov / st.var_p;
      for (int i = 0; i < vq.rows; ++i) {
        double a = vref.at(i, c) - st.mean_p;
        double b = vq.at(i, c) - st.mean_q;
        gq.at(i, c) = g * inv * (a - ratio * b);
        if (want_ref) gref.at(i, c) = g * inv * (b - ratio_p * a);
      }
    }
    accum(0, gq);
    if (want_ref) accum(1, gref);
  };
  return t.custom(Tensor::scalar(value), {q, ref}, back);
}

double mse(const Image& p, const Image& q) {
  if (!p.same_dims(q)) throw Error::dim("mse: image dims differ");
  Tape t;
  Var qv = t.constant(image_tensor(q));
  Var ref = t.constant(image_tensor(p));
  return t.val(mse_op(t, qv, ref)).v[0];
}

double ncc(const Image& p, const Image& q) {
  if (!p.same_dims(q)) throw Error::dim("ncc: image dims differ");
  Tape t;
  Var qv = t.constant(image_tensor(q));
  Var ref = t.constant(image_tensor(p));
  return t.val(ncc_op(t, qv, ref)).v[0];
}

double mine(const Image& p, const Image& q, const MlpSpec& critic, const double* theta,
            const SampleBatch& batch) {
  if (!p.same_dims(q)) throw Error::dim("mine: image dims differ");
  Tape t;
  MlpVars vars;
  {
    std::vector<int> w = critic.widths();
    size_t pos = 0;
    for (size_t l = 0; l + 1 < w.size(); ++l) {
      Tensor wt(w[l], w[l + 1]);
      for (double& x : wt.v) x = theta[pos++];
      Tensor bt(1, w[l + 1]);
      for (double& x : bt.v) x = theta[pos++];
      vars.weights.push_back(t.constant(std::move(wt)));
      vars.biases.push_back(t.constant(std::move(bt)));
    }
  }
  Var qv = t.constant(image_tensor(q));
  Var ref = t.constant(image_tensor(p));
  return t.val(mine_op(t, ref, qv, critic, vars, batch)).v[0];
}

Var symmetric_objective(Tape& t, const ImagePyramid& pyr_t, const ImagePyramid& pyr_m,
                        const std::vector<Var>& traj, const ObjectiveSetup& setup) {
  int levels = pyr_t.L;
  if (pyr_m.L != levels) throw Error::dim("symmetric_objective: pyramids differ in depth");
  if (static_cast<int>(traj.size()) != levels)
    throw Error::dim("symmetric_objective: trajectory does not match pyramid depth");
  if (setup.loss == LossKind::MINE) {
    if (!setup.critic || !setup.critic_vars)
      throw Error::invalid("symmetric_objective: MINE needs a critic");
    if (!setup.rng && !setup.fixed_batches)
      throw Error::invalid("symmetric_objective: MINE needs a sampler or pinned batches");
    if (setup.fixed_batches && setup.fixed_batches->size() != static_cast<size_t>(2 * levels))
      throw Error::invalid("symmetric_objective: expected 2L pinned batches");
  }

  auto score = [&](const Image& ref_img, Var warped, const SampleBatch* batch) -> Var {
    Var ref = t.constant(image_tensor(ref_img));
    switch (setup.loss) {
      case LossKind::MSE: return t.neg(mse_op(t, warped, ref));
      case LossKind::NCC: return ncc_op(t, warped, ref);
      case LossKind::MINE:
        return mine_op(t, ref, warped, *setup.critic, *setup.critic_vars, *batch);
    }
    throw Error::invalid("bad LossKind");
  };

  Var total;
  for (int l = 1; l <= levels; ++l) {
    const Image& tl = pyr_t.levels[static_cast<size_t>(l - 1)];
    const Image& ml = pyr_m.levels[static_cast<size_t>(l - 1)];
    Var v = traj[static_cast<size_t>(l - 1)];
    TapeComplexMatrix h =
        mexp_op(t, assemble_op(t, setup.group, v, setup.complex_coeffs), setup.n_terms);
    TapeComplexMatrix h_inv = mexp_op(
        t, assemble_op(t, setup.group, t.neg(v), setup.complex_coeffs), setup.n_terms);

    SampleBatch fwd_batch, inv_batch;
    const SampleBatch *fwd = nullptr, *inv = nullptr;
    if (setup.loss == LossKind::MINE) {
      if (setup.fixed_batches) {
        fwd = &(*setup.fixed_batches)[static_cast<size_t>(2 * (l - 1))];
        inv = &(*setup.fixed_batches)[static_cast<size_t>(2 * (l - 1) + 1)];
      } else {
        int n_fwd = setup.mine_batch > 0
                        ? std::min<int>(setup.mine_batch, static_cast<int>(tl.n_pixels()))
                        : default_mine_batch(tl.n_pixels());
        int n_inv = setup.mine_batch > 0
                        ? std::min<int>(setup.mine_batch, static_cast<int>(ml.n_pixels()))
                        : default_mine_batch(ml.n_pixels());
        fwd_batch = draw_batch(*setup.rng, tl.n_pixels(), n_fwd);
        inv_batch = draw_batch(*setup.rng, ml.n_pixels(), n_inv);
        fwd = &fwd_batch;
        inv = &inv_batch;
      }
    }

    Var warped_m = warp_op(t, ml, h, tl.width, tl.height, tl.depth);
    Var warped_t = warp_op(t, tl, h_inv, ml.width, ml.height, ml.depth);
    Var term = t.add(score(tl, warped_m, fwd), score(ml, warped_t, inv));
    total = l == 1 ? term : t.add(total, term);
  }
  return total;
}

}  // namespace odecme
