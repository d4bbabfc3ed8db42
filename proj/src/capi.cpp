// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme.h"

#include <cstring>
#include <string>

#include "odecme/error.hpp"
#include "odecme/geometry.hpp"
#include "odecme/image_io.hpp"
#include "odecme/imaging.hpp"
#include "odecme/metrics.hpp"
#include "odecme/registration.hpp"

struct odecme_image {
  odecme::Image img;
};
struct odecme_result {
  odecme::TransformResult res;
};
struct odecme_landmarks {
  odecme::LandmarkSet lm;
};

namespace {

thread_local std::string t_last_error = "no error";

odecme_status code_of(const odecme::Error& e) {
  switch (e.code()) {
    case odecme::ErrorCode::InvalidArgument: return ODECME_ERR_INVALID_ARGUMENT;
    case odecme::ErrorCode::Dimension: return ODECME_ERR_DIMENSION;
    case odecme::ErrorCode::Numeric: return ODECME_ERR_NUMERIC;
    case odecme::ErrorCode::Io: return ODECME_ERR_IO;
  }
  return ODECME_ERR_INTERNAL;
}

template <class F>
odecme_status guarded(F&& f) {
  try {
    f();
    return ODECME_OK;
  } catch (const odecme::Error& e) {
    t_last_error = e.what();
    return code_of(e);
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return ODECME_ERR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown failure";
    return ODECME_ERR_INTERNAL;
  }
}

odecme_status fail_null(const char* what) {
  t_last_error = std::string("null ") + what;
  return ODECME_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* odecme_last_error(void) { return t_last_error.c_str(); }

odecme_status odecme_image_load(const char* path, odecme_image** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out pointer");
  return guarded([&] { *out = new odecme_image{odecme::load_image(path)}; });
}

odecme_status odecme_image_save(const odecme_image* img, const char* path) {
  if (!img) return fail_null("image");
  if (!path) return fail_null("path");
  return guarded([&] { odecme::save_image(img->img, path); });
}

odecme_status odecme_image_create(const int32_t* dims, int32_t rank,
                                  int32_t channels, const double* data,
                                  odecme_image** out) {
  if (!dims) return fail_null("dims");
  if (!out) return fail_null("out pointer");
  return guarded([&] {
    if (rank != 2 && rank != 3)
      throw odecme::Error::invalid("image rank must be 2 or 3");
    if (channels < 1) throw odecme::Error::invalid("channel count must be positive");
    for (int i = 0; i < rank; ++i)
      if (dims[i] < 1) throw odecme::Error::invalid("image axes must be positive");
    odecme::Image img =
        rank == 2 ? odecme::Image(dims[0], dims[1], channels)
                  : odecme::Image(dims[0], dims[1], dims[2], channels, true);
    if (data) std::memcpy(img.data.data(), data, img.data.size() * sizeof(double));
    *out = new odecme_image{std::move(img)};
  });
}

odecme_status odecme_test_image(int32_t width, int32_t height, int32_t depth,
                                int32_t channels, uint64_t seed,
                                odecme_image** out) {
  if (!out) return fail_null("out pointer");
  return guarded([&] {
    *out = new odecme_image{
        odecme::make_test_image(width, height, depth, channels, seed)};
  });
}

odecme_status odecme_image_dims(const odecme_image* img, int32_t dims[3],
                                int32_t* rank, int32_t* channels) {
  if (!img) return fail_null("image");
  if (!dims || !rank || !channels) return fail_null("out pointer");
  dims[0] = img->img.width;
  dims[1] = img->img.height;
  dims[2] = img->img.depth;
  *rank = img->img.dims;
  *channels = img->img.channels;
  return ODECME_OK;
}

const double* odecme_image_data(const odecme_image* img) {
  return img ? img->img.data.data() : nullptr;
}

void odecme_image_destroy(odecme_image* img) { delete img; }

void odecme_register_options_init(odecme_register_options* opt) {
  if (!opt) return;
  opt->group = "aff2";
  opt->complex_coefficients = 1;
  opt->solver = "rk4";
  opt->loss = "mse";
  opt->levels = 4;
  opt->downscale = 2.0;
  opt->n_terms = odecme::kDefaultExpTerms;
  opt->iterations = 500;
  opt->lr_theta = 0.1;
  opt->lr_phi = 0.01;
  opt->lr_u = 0.01;
  opt->seed = 0;
  opt->mine_batch = 0;
  opt->generator_mask = nullptr;
  opt->drmime_mode = 0;
  opt->warmup_iterations = 0;
  opt->convergence_stop = 0;
  opt->emit_params = 0;
}

odecme_status odecme_register(const odecme_image* fixed,
                              const odecme_image* moving,
                              const odecme_register_options* opt,
                              odecme_result** out) {
  if (!fixed || !moving) return fail_null("image");
  if (!opt) return fail_null("options");
  if (!out) return fail_null("out pointer");
  return guarded([&] {
    odecme::RegistrationConfig cfg;
    if (!opt->group || !opt->solver || !opt->loss)
      throw odecme::Error::invalid("options name fields must be set");
    cfg.group = odecme::parse_group(opt->group);
    cfg.complex_coeffs = opt->complex_coefficients != 0;
    cfg.solver = odecme::parse_solver(opt->solver);
    cfg.loss = odecme::parse_loss(opt->loss);
    cfg.levels = opt->levels;
    cfg.downscale = opt->downscale;
    cfg.n_terms = opt->n_terms;
    cfg.iterations = opt->iterations;
    cfg.lr_theta = opt->lr_theta;
    cfg.lr_phi = opt->lr_phi;
    cfg.lr_u = opt->lr_u;
    cfg.seed = opt->seed;
    cfg.mine_batch = opt->mine_batch;
    if (opt->generator_mask)
      cfg.mask = odecme::parse_mask(opt->generator_mask, cfg.group);
    cfg.drmime_mode = opt->drmime_mode != 0;
    cfg.warmup_iters = opt->warmup_iterations;
    cfg.convergence_stop = opt->convergence_stop != 0;
    cfg.emit_params = opt->emit_params != 0;
    *out = new odecme_result{odecme::register_images(fixed->img, moving->img, cfg)};
  });
}

odecme_status odecme_result_save_json(const odecme_result* res, const char* path) {
  if (!res) return fail_null("result");
  if (!path) return fail_null("path");
  return guarded([&] { odecme::save_result(path, res->res); });
}

odecme_status odecme_result_load_json(const char* path, odecme_result** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out pointer");
  return guarded([&] { *out = new odecme_result{odecme::load_result(path)}; });
}

odecme_status odecme_result_matrix(const odecme_result* res, int32_t which,
                                   int32_t part, double* buf, int32_t* dim) {
  if (!res) return fail_null("result");
  if (!dim) return fail_null("dim pointer");
  return guarded([&] {
    if (which != 0 && which != 1)
      throw odecme::Error::invalid("which must be 0 (forward) or 1 (inverse)");
    if (part != 0 && part != 1)
      throw odecme::Error::invalid("part must be 0 (re) or 1 (im)");
    const odecme::ComplexMatrix& m = which ? res->res.h_inv : res->res.h;
    const Eigen::MatrixXd& p = part ? m.im : m.re;
    *dim = static_cast<int32_t>(p.rows());
    if (!buf) return;
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      for (Eigen::Index c = 0; c < p.cols(); ++c)
        buf[r * p.cols() + c] = p(r, c);
  });
}

odecme_status odecme_result_objective(const odecme_result* res,
                                      const double** values, int32_t* count) {
  if (!res) return fail_null("result");
  if (!values || !count) return fail_null("out pointer");
  *values = res->res.loss_history.data();
  *count = static_cast<int32_t>(res->res.loss_history.size());
  return ODECME_OK;
}

odecme_status odecme_result_params_json(const odecme_result* res,
                                        const char** json) {
  if (!res) return fail_null("result");
  if (!json) return fail_null("out pointer");
  *json = res->res.params_checkpoint.c_str();
  return ODECME_OK;
}

void odecme_result_destroy(odecme_result* res) { delete res; }

odecme_status odecme_warp(const odecme_image* img, const odecme_result* res,
                          int32_t inverse, odecme_image** out) {
  if (!img || !res) return fail_null("argument");
  if (!out) return fail_null("out pointer");
  return guarded([&] {
    const odecme::TransformResult& r = res->res;
    const odecme::ComplexMatrix& h = inverse ? r.h_inv : r.h;
    const std::vector<int>& od = inverse ? r.moving_dims : r.fixed_dims;
    if (static_cast<int>(od.size()) != img->img.dims)
      throw odecme::Error::dim("warp: image rank does not match the result");
    int w = od[0], hgt = od[1], d = od.size() == 3 ? od[2] : 1;
    *out = new odecme_image{odecme::warp(img->img, h, w, hgt, d)};
  });
}

odecme_status odecme_landmarks_load(const char* path, odecme_landmarks** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out pointer");
  return guarded(
      [&] { *out = new odecme_landmarks{odecme::load_landmarks_csv(path)}; });
}

odecme_status odecme_landmarks_load_fire(const char* path,
                                         const char* moving_path_or_null,
                                         odecme_landmarks** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out pointer");
  return guarded([&] {
    *out = new odecme_landmarks{
        moving_path_or_null
            ? odecme::load_landmarks_fire(path, moving_path_or_null)
            : odecme::load_landmarks_fire(path)};
  });
}

odecme_status odecme_landmarks_save(const odecme_landmarks* lm, const char* path) {
  if (!lm) return fail_null("landmarks");
  if (!path) return fail_null("path");
  return guarded([&] { odecme::save_landmarks_csv(path, lm->lm); });
}

void odecme_landmarks_destroy(odecme_landmarks* lm) { delete lm; }

odecme_status odecme_naed(const odecme_landmarks* lm, const odecme_result* res,
                          double* out) {
  if (!lm || !res) return fail_null("argument");
  if (!out) return fail_null("out pointer");
  return guarded([&] {
    odecme::LandmarkSet set = lm->lm;
    set.fixed_dims = res->res.fixed_dims;
    set.moving_dims = res->res.moving_dims;
    *out = odecme::naed(set, res->res.h_inv);
  });
}

odecme_status odecme_ssim(const odecme_image* a, const odecme_image* b,
                          double* out) {
  if (!a || !b) return fail_null("image");
  if (!out) return fail_null("out pointer");
  return guarded([&] { *out = odecme::ssim(a->img, b->img); });
}

odecme_status odecme_psnr(const odecme_image* a, const odecme_image* b,
                          double* out) {
  if (!a || !b) return fail_null("image");
  if (!out) return fail_null("out pointer");
  return guarded([&] { *out = odecme::psnr(a->img, b->img); });
}

odecme_status odecme_synth(const odecme_image* img, const char* group,
                           double sd_real, double sd_imag, uint64_t seed,
                           odecme_image** fixed_out, odecme_image** moving_out,
                           odecme_landmarks** landmarks_out,
                           odecme_result** truth_out) {
  if (!img) return fail_null("image");
  if (!group) return fail_null("group");
  if (!fixed_out || !moving_out || !landmarks_out || !truth_out)
    return fail_null("out pointer");
  return guarded([&] {
    odecme::GroupSpec g = odecme::parse_group(group);
    odecme::SynthPair sp = odecme::synth_pair(img->img, g, sd_real, sd_imag, seed);
    odecme::TransformResult truth =
        odecme::synth_truth(sp, g, sd_imag > 0.0, seed);
    *fixed_out = new odecme_image{std::move(sp.fixed)};
    *moving_out = new odecme_image{std::move(sp.moving)};
    *landmarks_out = new odecme_landmarks{std::move(sp.landmarks)};
    *truth_out = new odecme_result{std::move(truth)};
  });
}

odecme_status odecme_grid_csv(const odecme_result* res, int32_t inverse,
                              int32_t lines_per_axis, int32_t samples_per_line,
                              const char* path) {
  if (!res) return fail_null("result");
  if (!path) return fail_null("path");
  return guarded([&] {
    const odecme::ComplexMatrix& h = inverse ? res->res.h_inv : res->res.h;
    std::vector<odecme::Polyline> lines =
        odecme::render_grid(h, lines_per_axis, samples_per_line);
    odecme::write_polylines_csv(path, lines);
  });
}

}  // extern "C"
