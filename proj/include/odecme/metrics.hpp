// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "odecme/geometry.hpp"
#include "odecme/imaging.hpp"
#include "odecme/registration.hpp"

namespace odecme {

// Corresponding point pairs in pixel units, plus the frame sizes needed to
// move between pixel and canonical coordinates. Counts must match and points
// must lie inside their frames.
struct LandmarkSet {
  Eigen::MatrixXd fixed_pts, moving_pts;     // n x k, k in {2, 3}
  std::vector<int> fixed_dims, moving_dims;  // {w, h} or {w, h, d}

  long count() const { return fixed_pts.rows(); }
  int dims() const { return static_cast<int>(fixed_pts.cols()); }
};

// Mean distance between fixed points and moving points mapped through h
// (a moving-frame -> fixed-frame transform), with every coordinate scaled
// to [0,1] by its axis length so differently sized frames compare.
double naed(const LandmarkSet& lm, const ComplexMatrix& h);

// Structural similarity with an 11-wide Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1. Volumes use the 3-D window.
double ssim(const Image& p, const Image& q);

// 10*log10(1/mse), reported as 100 dB when mse underflows to zero.
double psnr(const Image& p, const Image& q);

// CSV with header "fx,fy,mx,my" ("fx,fy,fz,mx,my,mz" for volumes), one pair
// per row. Frame sizes are not part of the file; callers fill them in from
// the transform they evaluate against.
LandmarkSet load_landmarks_csv(const std::string& path);
void save_landmarks_csv(const std::string& path, const LandmarkSet& lm);

// Headerless whitespace ground truth: one file with rows "fx fy mx my", or
// the split form with one "x y" file per frame.
LandmarkSet load_landmarks_fire(const std::string& path);
LandmarkSet load_landmarks_fire(const std::string& fixed_path,
                                const std::string& moving_path);

// Seeded multi-octave value noise in [0,1]; depth 1 gives a flat image.
// Smooth enough to carry gradients, structured enough to register.
Image make_test_image(int width, int height, int depth, int channels,
                      std::uint64_t seed);

// A registration problem with known answer: moving is img pushed through
// the inverse transform, so recovering h realigns it. Landmarks are interior
// grid corners of the moving frame carried into the fixed frame by h_inv.
struct SynthPair {
  Image fixed, moving;
  LandmarkSet landmarks;
  CoefficientVector true_v;
  ComplexMatrix h;      // fixed -> moving, mexp(assemble(true_v))
  ComplexMatrix h_inv;  // moving -> fixed
};

SynthPair synth_pair(const Image& img, GroupSpec group, double sd_real,
                     double sd_imag, std::uint64_t seed, int grid_per_axis = 3,
                     int n_terms = kDefaultExpTerms);

// The pair's ground truth shaped as a result file (single-level trajectory
// holding true_v), so `eval` consumes truth and recovered transforms alike.
TransformResult synth_truth(const SynthPair& sp, GroupSpec group,
                            bool complex_coeffs, std::uint64_t seed,
                            int n_terms = kDefaultExpTerms);

}  // namespace odecme
