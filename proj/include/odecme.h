/* odecme: diffeomorphic image registration via complex matrix exponentials.
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the registration core. All objects are opaque; every
 * function returns a status code and leaves a message for the calling
 * thread, readable via odecme_last_error(). Pointers returned through
 * out-parameters are owned by the caller and released with the matching
 * _destroy function.
 */
#ifndef ODECME_H
#define ODECME_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum odecme_status {
  ODECME_OK = 0,
  ODECME_ERR_INVALID_ARGUMENT = 1,
  ODECME_ERR_DIMENSION = 2,
  ODECME_ERR_NUMERIC = 3,
  ODECME_ERR_IO = 4,
  ODECME_ERR_INTERNAL = 5
} odecme_status;

/* Message for the last failing call on this thread; never NULL. */
const char* odecme_last_error(void);

typedef struct odecme_image odecme_image;
typedef struct odecme_result odecme_result;
typedef struct odecme_landmarks odecme_landmarks;

/* ---- images ------------------------------------------------------------ */

/* Formats by extension: .png, .pgm/.ppm, .raw/.f32 (with JSON sidecar). */
odecme_status odecme_image_load(const char* path, odecme_image** out);
odecme_status odecme_image_save(const odecme_image* img, const char* path);

/* dims is {width, height} (rank 2) or {width, height, depth} (rank 3);
 * data is layered ((z*height + y)*width + x)*channels + c, values in [0,1].
 * Pass data = NULL for a zero image. */
odecme_status odecme_image_create(const int32_t* dims, int32_t rank,
                                  int32_t channels, const double* data,
                                  odecme_image** out);

/* Seeded multi-octave value-noise test image (depth 1 gives a flat image). */
odecme_status odecme_test_image(int32_t width, int32_t height, int32_t depth,
                                int32_t channels, uint64_t seed,
                                odecme_image** out);

odecme_status odecme_image_dims(const odecme_image* img, int32_t dims[3],
                                int32_t* rank, int32_t* channels);
/* Borrowed pointer, valid until the image is destroyed. */
const double* odecme_image_data(const odecme_image* img);
void odecme_image_destroy(odecme_image* img);

/* ---- registration ------------------------------------------------------ */

typedef struct odecme_register_options {
  const char* group;  /* "aff2" | "se3" | "sim3" */
  int32_t complex_coefficients;
  const char* solver; /* "euler" | "rk4" */
  const char* loss;   /* "mse" | "ncc" | "mine" */
  int32_t levels;
  double downscale;
  int32_t n_terms;
  int32_t iterations;
  double lr_theta; /* critic */
  double lr_phi;   /* flow net */
  double lr_u;     /* coefficient seed */
  uint64_t seed;
  int32_t mine_batch;         /* 0 = automatic */
  const char* generator_mask; /* comma 0/1 list, NULL = all generators */
  int32_t drmime_mode;        /* shared real v, no coefficient flow */
  int32_t warmup_iterations;  /* MINE critic-only iterations first */
  int32_t convergence_stop;
  int32_t emit_params; /* keep the optimizer checkpoint on the result */
} odecme_register_options;

/* Fills the stock configuration (aff2, complex, rk4, mse, 4 levels). */
void odecme_register_options_init(odecme_register_options* opt);

odecme_status odecme_register(const odecme_image* fixed,
                              const odecme_image* moving,
                              const odecme_register_options* opt,
                              odecme_result** out);

/* ---- results ------------------------------------------------------------ */

odecme_status odecme_result_save_json(const odecme_result* res, const char* path);
odecme_status odecme_result_load_json(const char* path, odecme_result** out);

/* which: 0 = fixed->moving, 1 = inverse. part: 0 = re, 1 = im. buf holds
 * dim*dim doubles row-major; query dim first by passing buf = NULL. */
odecme_status odecme_result_matrix(const odecme_result* res, int32_t which,
                                   int32_t part, double* buf, int32_t* dim);

/* Borrowed view of the per-iteration objective values. */
odecme_status odecme_result_objective(const odecme_result* res,
                                      const double** values, int32_t* count);

/* Optimizer checkpoint JSON; empty string unless emit_params was set. */
odecme_status odecme_result_params_json(const odecme_result* res,
                                        const char** json);

void odecme_result_destroy(odecme_result* res);

/* Resample img through the result's transform: inverse = 0 maps a
 * moving-frame image into the fixed frame, inverse = 1 the reverse. */
odecme_status odecme_warp(const odecme_image* img, const odecme_result* res,
                          int32_t inverse, odecme_image** out);

/* ---- landmarks and metrics ---------------------------------------------- */

/* CSV with header fx,fy,mx,my (fx,fy,fz,mx,my,mz for volumes). */
odecme_status odecme_landmarks_load(const char* path, odecme_landmarks** out);
/* Headerless whitespace table "fx fy mx my"; pass a second path when the
 * fixed and moving points live in separate two-column files. */
odecme_status odecme_landmarks_load_fire(const char* path,
                                         const char* moving_path_or_null,
                                         odecme_landmarks** out);
odecme_status odecme_landmarks_save(const odecme_landmarks* lm, const char* path);
void odecme_landmarks_destroy(odecme_landmarks* lm);

/* Mean normalized distance after mapping moving points through the result's
 * inverse transform; frame sizes come from the result. */
odecme_status odecme_naed(const odecme_landmarks* lm, const odecme_result* res,
                          double* out);
odecme_status odecme_ssim(const odecme_image* a, const odecme_image* b,
                          double* out);
odecme_status odecme_psnr(const odecme_image* a, const odecme_image* b,
                          double* out);

/* ---- synthetic benchmarks ----------------------------------------------- */

/* Draws a seeded transform, warps img into a moving image, and reports
 * grid landmarks plus the ground truth shaped as a result object. */
odecme_status odecme_synth(const odecme_image* img, const char* group,
                           double sd_real, double sd_imag, uint64_t seed,
                           odecme_image** fixed_out, odecme_image** moving_out,
                           odecme_landmarks** landmarks_out,
                           odecme_result** truth_out);

/* Transformed grid polylines as CSV rows "line,x,y" (2-D transforms). */
odecme_status odecme_grid_csv(const odecme_result* res, int32_t inverse,
                              int32_t lines_per_axis, int32_t samples_per_line,
                              const char* path);

#ifdef __cplusplus
}
#endif

#endif /* ODECME_H */
