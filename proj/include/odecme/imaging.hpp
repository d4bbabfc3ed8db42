// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "odecme/lie_basis.hpp"
#include "odecme/tape.hpp"

namespace odecme {

// Intensity image or volume; values live in [0,1]. Layout is
// data[((z*height + y)*width + x)*channels + c]. `dims` distinguishes a true
// volume from a flat image even when depth == 1.
struct Image {
  int width = 0, height = 0, depth = 1, channels = 1;
  int dims = 2;  // 2 or 3
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 1)
      : width(w), height(h), channels(c), dims(2),
        data(static_cast<size_t>(w) * h * c, 0.0) {}
  Image(int w, int h, int d, int c, bool volume)
      : width(w), height(h), depth(d), channels(c), dims(volume ? 3 : 2),
        data(static_cast<size_t>(w) * h * d * c, 0.0) {}

  size_t index(int x, int y, int z, int c) const {
    return ((static_cast<size_t>(z) * height + y) * width + x) * channels + c;
  }
  double& at(int x, int y, int z = 0, int c = 0) { return data[index(x, y, z, c)]; }
  double at(int x, int y, int z = 0, int c = 0) const { return data[index(x, y, z, c)]; }
  long n_pixels() const { return static_cast<long>(width) * height * depth; }
  bool same_dims(const Image& o) const {
    return width == o.width && height == o.height && depth == o.depth &&
           channels == o.channels && dims == o.dims;
  }
};

// All pyramid levels share one canonical frame: pixel p on an axis of n
// samples sits at -1 + 2p/(n-1), so a single transform matrix is meaningful
// at every resolution.
inline double px_to_canonical(double p, int n) { return n > 1 ? 2.0 * p / (n - 1) - 1.0 : 0.0; }
inline double canonical_to_px(double c, int n) { return (c + 1.0) * 0.5 * (n - 1); }

struct ImagePyramid {
  std::vector<Image> levels;   // levels[0] = original
  std::vector<double> scales;  // d^(-l+1)
  double downscale = 2.0;
  int L = 1;
};

// Separable Gaussian blur, kernel truncated at radius ceil(3*sigma) and
// renormalized over the in-bounds taps, so constants are preserved exactly.
Image gaussian_blur(const Image& img, double sigma);

// Each level is blur(previous) resampled to ceil(previous/d) per axis with
// sigma = 0.5*d. Fails if any level would drop below 4 pixels on some axis.
ImagePyramid build_pyramid(const Image& img, int levels, double downscale);

// Backward warp: out(p) = img(H(p)) sampled bi/trilinearly, p in canonical
// coordinates of the output grid. Samples outside img read `fill`.
Image warp(const Image& img, const ComplexMatrix& h, int out_w, int out_h, int out_d = 1,
           double fill = 0.0);
Image warp(const Image& img, const ComplexMatrix& h);  // output dims = img dims

// Tape counterpart: result is (n_pixels x channels), rows in image layout
// order. Gradients flow to the matrix parts only; img is borrowed and must
// outlive the tape.
Var warp_op(Tape& t, const Image& img, TapeComplexMatrix h, int out_w, int out_h,
            int out_d = 1, double fill = 0.0);

// Image intensities as an (n_pixels x channels) tensor, same row order as
// warp_op output.
Tensor image_tensor(const Image& img);

}  // namespace odecme
