// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/imaging.hpp"

#include <cmath>
#include <cstring>

#include "odecme/error.hpp"
#include "odecme/geometry.hpp"

namespace odecme {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double x = static_cast<double>(i);
    w[static_cast<size_t>(i + radius)] = std::exp(-0.5 * x * x / (sigma * sigma));
    total += w[static_cast<size_t>(i + radius)];
  }
  for (double& x : w) x /= total;
  return w;
}

// Blur along one axis; stride selects the axis, `count` its length. Taps
// falling outside are dropped and the remaining weights renormalized.
void blur_line(const double* in, double* out, int count, size_t stride,
               const std::vector<double>& w) {
  int radius = (static_cast<int>(w.size()) - 1) / 2;
  for (int i = 0; i < count; ++i) {
    double acc = 0.0, norm = 0.0;
    int lo = std::max(-radius, -i);
    int hi = std::min(radius, count - 1 - i);
    for (int t = lo; t <= hi; ++t) {
      double wi = w[static_cast<size_t>(t + radius)];
      acc += wi * in[(static_cast<size_t>(i) + t) * stride];
      norm += wi;
    }
    out[static_cast<size_t>(i) * stride] = acc / norm;
  }
}

enum class Axis { X, Y, Z };

Image blur_axis(const Image& img, Axis axis, const std::vector<double>& w) {
  Image out = img;
  size_t cs = 1;
  size_t xs = static_cast<size_t>(img.channels);
  size_t ys = xs * img.width;
  size_t zs = ys * img.height;
  for (int z = 0; z < img.depth; ++z)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        // Iterate the two axes orthogonal to `axis`; the inner blur walks the
        // third. Skip all but the first position along the blurred axis.
        if ((axis == Axis::X && x != 0) || (axis == Axis::Y && y != 0) ||
            (axis == Axis::Z && z != 0))
          continue;
        size_t base = zs * z + ys * y + xs * x;
        size_t stride = axis == Axis::X ? xs : axis == Axis::Y ? ys : zs;
        int count = axis == Axis::X ? img.width : axis == Axis::Y ? img.height : img.depth;
        for (int c = 0; c < img.channels; ++c)
          blur_line(img.data.data() + base + c * cs, out.data.data() + base + c * cs, count,
                    stride, w);
      }
  return out;
}

// Linear resample along one axis onto `target` samples, endpoints aligned
// (canonical frames of source and target coincide).
Image resample_axis(const Image& img, Axis axis, int target) {
  int source = axis == Axis::X ? img.width : axis == Axis::Y ? img.height : img.depth;
  if (target == source) return img;
  Image out(axis == Axis::X ? target : img.width, axis == Axis::Y ? target : img.height,
            axis == Axis::Z ? target : img.depth, img.channels, img.dims == 3);
  double step = target > 1 ? static_cast<double>(source - 1) / (target - 1) : 0.0;
  for (int z = 0; z < out.depth; ++z)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        int i = axis == Axis::X ? x : axis == Axis::Y ? y : z;
        double pos = i * step;
        int p0 = static_cast<int>(pos);
        if (p0 > source - 2) p0 = source - 2;
        if (p0 < 0) p0 = 0;
        double f = pos - p0;
        for (int c = 0; c < img.channels; ++c) {
          double a = axis == Axis::X   ? img.at(p0, y, z, c)
                     : axis == Axis::Y ? img.at(x, p0, z, c)
                                       : img.at(x, y, p0, c);
          double b = axis == Axis::X   ? img.at(p0 + 1, y, z, c)
                     : axis == Axis::Y ? img.at(x, p0 + 1, z, c)
                                       : img.at(x, y, p0 + 1, c);
          out.at(x, y, z, c) = (1.0 - f) * a + f * b;
        }
      }
  return out;
}

int ceil_div_size(int n, double d) {
  return static_cast<int>(std::ceil(static_cast<double>(n) / d));
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) throw Error::invalid("gaussian_blur: sigma must be positive");
  std::vector<double> w = gaussian_kernel(sigma);
  Image out = blur_axis(img, Axis::X, w);
  out = blur_axis(out, Axis::Y, w);
  if (img.dims == 3) out = blur_axis(out, Axis::Z, w);
  return out;
}

ImagePyramid build_pyramid(const Image& img, int levels, double downscale) {
  if (levels < 1) throw Error::invalid("build_pyramid: need at least one level");
  if (!(downscale > 1.0)) throw Error::invalid("build_pyramid: downscale factor must exceed 1");
  if (img.width < 1 || img.height < 1 || img.depth < 1)
    throw Error::invalid("build_pyramid: empty image");

  // Validate every level's size up front so failure names the bad level.
  int w = img.width, h = img.height, d = img.depth;
  for (int l = 1; l <= levels; ++l) {
    if (l > 1) {
      w = ceil_div_size(w, downscale);
      h = ceil_div_size(h, downscale);
      if (img.dims == 3) d = ceil_div_size(d, downscale);
    }
    int smallest = std::min(w, h);
    if (img.dims == 3) smallest = std::min(smallest, d);
    if (smallest < 4)
      throw Error::invalid("build_pyramid: image too small for requested L; level " +
                           std::to_string(l) + " would be " + std::to_string(w) + "x" +
                           std::to_string(h) +
                           (img.dims == 3 ? "x" + std::to_string(d) : ""));
  }

  ImagePyramid pyr;
  pyr.downscale = downscale;
  pyr.L = levels;
  pyr.levels.push_back(img);
  pyr.scales.push_back(1.0);
  double sigma = 0.5 * downscale;
  for (int l = 2; l <= levels; ++l) {
    const Image& prev = pyr.levels.back();
    Image blurred = gaussian_blur(prev, sigma);
    blurred = resample_axis(blurred, Axis::X, ceil_div_size(prev.width, downscale));
    blurred = resample_axis(blurred, Axis::Y, ceil_div_size(prev.height, downscale));
    if (img.dims == 3)
      blurred = resample_axis(blurred, Axis::Z, ceil_div_size(prev.depth, downscale));
    pyr.levels.push_back(std::move(blurred));
    pyr.scales.push_back(std::pow(downscale, -(l - 1)));
  }
  return pyr;
}

namespace {

struct WarpPlan {
  const Image* img;
  int out_w, out_h, out_d;
  double fill;
  int d;  // matrix dimension
};

// Shared by the forward pass and the reverse sweep: visit(row, jet, cx, cy,
// cz) is called for every output pixel with the transform jet already
// evaluated.
template <class Visit>
void for_each_warp_pixel(const WarpPlan& plan, const double* hre, const double* him,
                         Visit&& visit) {
  PointJet jet;
  double in[3];
  long row = 0;
  for (int z = 0; z < plan.out_d; ++z) {
    double cz = px_to_canonical(z, plan.out_d);
    for (int y = 0; y < plan.out_h; ++y) {
      double cy = px_to_canonical(y, plan.out_h);
      for (int x = 0; x < plan.out_w; ++x, ++row) {
        double cx = px_to_canonical(x, plan.out_w);
        in[0] = cx;
        in[1] = cy;
        in[2] = cz;
        if (!transform_point_jet(hre, him, plan.d, in, jet))
          throw Error::numeric("singular transform: denominator below 1e-12 at output pixel " +
                               std::to_string(row));
        visit(row, jet, cx, cy, cz);
      }
    }
  }
}

inline double fetch2(const Image& img, int x, int y, int c, double fill) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return fill;
  return img.data[(static_cast<size_t>(y) * img.width + x) * img.channels + c];
}

inline double fetch3(const Image& img, int x, int y, int z, int c, double fill) {
  if (x < 0 || y < 0 || z < 0 || x >= img.width || y >= img.height || z >= img.depth)
    return fill;
  return img.data[((static_cast<size_t>(z) * img.height + y) * img.width + x) * img.channels +
                  c];
}

}  // namespace

Var warp_op(Tape& t, const Image& img, TapeComplexMatrix h, int out_w, int out_h, int out_d,
            double fill) {
  const Tensor& tre = t.val(h.re);
  const Tensor& tim = t.val(h.im);
  int d = img.dims + 1;
  if (tre.rows != d || tre.cols != d || !tim.same_shape(tre))
    throw Error::dim("warp: transform dimension does not match image dimensionality");
  if (out_w < 1 || out_h < 1 || out_d < 1) throw Error::invalid("warp: empty output");
  if (img.dims == 2 && out_d != 1) throw Error::dim("warp: 2-D image cannot fill a volume");

  WarpPlan plan{&img, out_w, out_h, out_d, fill, d};
  long npix = static_cast<long>(out_w) * out_h * out_d;
  int nc = img.channels;
  Tensor out(static_cast<int>(npix), nc);

  if (img.dims == 2) {
    for_each_warp_pixel(plan, tre.v.data(), tim.v.data(),
                        [&](long row, const PointJet& jet, double, double, double) {
                          double xm = canonical_to_px(jet.out[0], img.width);
                          double ym = canonical_to_px(jet.out[1], img.height);
                          int x0 = static_cast<int>(std::floor(xm));
                          int y0 = static_cast<int>(std::floor(ym));
                          double fx = xm - x0, fy = ym - y0;
                          for (int c = 0; c < nc; ++c) {
                            double c00 = fetch2(img, x0, y0, c, fill);
                            double c10 = fetch2(img, x0 + 1, y0, c, fill);
                            double c01 = fetch2(img, x0, y0 + 1, c, fill);
                            double c11 = fetch2(img, x0 + 1, y0 + 1, c, fill);
                            double top = c00 + fx * (c10 - c00);
                            double bot = c01 + fx * (c11 - c01);
                            out.v[static_cast<size_t>(row) * nc + c] = top + fy * (bot - top);
                          }
                        });
  } else {
    for_each_warp_pixel(plan, tre.v.data(), tim.v.data(),
                        [&](long row, const PointJet& jet, double, double, double) {
                          double xm = canonical_to_px(jet.out[0], img.width);
                          double ym = canonical_to_px(jet.out[1], img.height);
                          double zm = canonical_to_px(jet.out[2], img.depth);
                          int x0 = static_cast<int>(std::floor(xm));
                          int y0 = static_cast<int>(std::floor(ym));
                          int z0 = static_cast<int>(std::floor(zm));
                          double fx = xm - x0, fy = ym - y0, fz = zm - z0;
                          for (int c = 0; c < nc; ++c) {
                            double v000 = fetch3(img, x0, y0, z0, c, fill);
                            double v100 = fetch3(img, x0 + 1, y0, z0, c, fill);
                            double v010 = fetch3(img, x0, y0 + 1, z0, c, fill);
                            double v110 = fetch3(img, x0 + 1, y0 + 1, z0, c, fill);
                            double v001 = fetch3(img, x0, y0, z0 + 1, c, fill);
                            double v101 = fetch3(img, x0 + 1, y0, z0 + 1, c, fill);
                            double v011 = fetch3(img, x0, y0 + 1, z0 + 1, c, fill);
                            double v111 = fetch3(img, x0 + 1, y0 + 1, z0 + 1, c, fill);
                            double c00 = v000 + fx * (v100 - v000);
                            double c10 = v010 + fx * (v110 - v010);
                            double c01 = v001 + fx * (v101 - v001);
                            double c11 = v011 + fx * (v111 - v011);
                            double top = c00 + fy * (c10 - c00);
                            double bot = c01 + fy * (c11 - c01);
                            out.v[static_cast<size_t>(row) * nc + c] = top + fz * (bot - top);
                          }
                        });
  }

  const Image* imgp = &img;
  auto back = [&t, h, plan, imgp, nc](const Tensor& gout, const Tape::GradSink& accum) {
    const Image& img2 = *imgp;
    const Tensor& vre = t.val(h.re);
    const Tensor& vim = t.val(h.im);
    int d = plan.d;
    Tensor ghre(d, d), ghim(d, d);
    double half_w = 0.5 * (img2.width - 1);
    double half_h = 0.5 * (img2.height - 1);
    double half_d = 0.5 * (img2.depth - 1);
    double gr[4], gs[4], gc[3], p[4];
    if (img2.dims == 2) {
      for_each_warp_pixel(plan, vre.v.data(), vim.v.data(),
                          [&](long row, const PointJet& jet, double cx, double cy, double) {
                            double xm = canonical_to_px(jet.out[0], img2.width);
                            double ym = canonical_to_px(jet.out[1], img2.height);
                            int x0 = static_cast<int>(std::floor(xm));
                            int y0 = static_cast<int>(std::floor(ym));
                            double fx = xm - x0, fy = ym - y0;
                            double gx = 0.0, gy = 0.0;
                            for (int c = 0; c < nc; ++c) {
                              double g = gout.v[static_cast<size_t>(row) * nc + c];
                              if (g == 0.0) continue;
                              double c00 = fetch2(img2, x0, y0, c, plan.fill);
                              double c10 = fetch2(img2, x0 + 1, y0, c, plan.fill);
                              double c01 = fetch2(img2, x0, y0 + 1, c, plan.fill);
                              double c11 = fetch2(img2, x0 + 1, y0 + 1, c, plan.fill);
                              gx += g * ((1.0 - fy) * (c10 - c00) + fy * (c11 - c01));
                              gy += g * ((1.0 - fx) * (c01 - c00) + fx * (c11 - c10));
                            }
                            if (gx == 0.0 && gy == 0.0) return;
                            gc[0] = gx * half_w;
                            gc[1] = gy * half_h;
                            point_pullback(jet, d, gc, gr, gs);
                            p[0] = cx;
                            p[1] = cy;
                            p[2] = 1.0;
                            for (int a = 0; a < 3; ++a)
                              for (int b = 0; b < 3; ++b) {
                                ghre.at(a, b) += gr[a] * p[b];
                                ghim.at(a, b) += gs[a] * p[b];
                              }
                          });
    } else {
      for_each_warp_pixel(
          plan, vre.v.data(), vim.v.data(),
          [&](long row, const PointJet& jet, double cx, double cy, double cz) {
            double xm = canonical_to_px(jet.out[0], img2.width);
            double ym = canonical_to_px(jet.out[1], img2.height);
            double zm = canonical_to_px(jet.out[2], img2.depth);
            int x0 = static_cast<int>(std::floor(xm));
            int y0 = static_cast<int>(std::floor(ym));
            int z0 = static_cast<int>(std::floor(zm));
            double fx = xm - x0, fy = ym - y0, fz = zm - z0;
            double gx = 0.0, gy = 0.0, gz = 0.0;
            for (int c = 0; c < nc; ++c) {
              double g = gout.v[static_cast<size_t>(row) * nc + c];
              if (g == 0.0) continue;
              double v000 = fetch3(img2, x0, y0, z0, c, plan.fill);
              double v100 = fetch3(img2, x0 + 1, y0, z0, c, plan.fill);
              double v010 = fetch3(img2, x0, y0 + 1, z0, c, plan.fill);
              double v110 = fetch3(img2, x0 + 1, y0 + 1, z0, c, plan.fill);
              double v001 = fetch3(img2, x0, y0, z0 + 1, c, plan.fill);
              double v101 = fetch3(img2, x0 + 1, y0, z0 + 1, c, plan.fill);
              double v011 = fetch3(img2, x0, y0 + 1, z0 + 1, c, plan.fill);
              double v111 = fetch3(img2, x0 + 1, y0 + 1, z0 + 1, c, plan.fill);
              double dx00 = v100 - v000, dx10 = v110 - v010;
              double dx01 = v101 - v001, dx11 = v111 - v011;
              gx += g * ((1.0 - fz) * ((1.0 - fy) * dx00 + fy * dx10) +
                         fz * ((1.0 - fy) * dx01 + fy * dx11));
              double dy0 = (v010 + fx * (v110 - v010)) - (v000 + fx * (v100 - v000));
              double dy1 = (v011 + fx * (v111 - v011)) - (v001 + fx * (v101 - v001));
              gy += g * ((1.0 - fz) * dy0 + fz * dy1);
              double c00 = v000 + fx * dx00, c10 = v010 + fx * dx10;
              double c01 = v001 + fx * dx01, c11 = v011 + fx * dx11;
              double lo = c00 + fy * (c10 - c00);
              double hi = c01 + fy * (c11 - c01);
              gz += g * (hi - lo);
            }
            if (gx == 0.0 && gy == 0.0 && gz == 0.0) return;
            gc[0] = gx * half_w;
            gc[1] = gy * half_h;
            gc[2] = gz * half_d;
            point_pullback(jet, d, gc, gr, gs);
            p[0] = cx;
            p[1] = cy;
            p[2] = cz;
            p[3] = 1.0;
            for (int a = 0; a < 4; ++a)
              for (int b = 0; b < 4; ++b) {
                ghre.at(a, b) += gr[a] * p[b];
                ghim.at(a, b) += gs[a] * p[b];
              }
          });
    }
    accum(0, ghre);
    accum(1, ghim);
  };
  return t.custom(std::move(out), {h.re, h.im}, back);
}

Image warp(const Image& img, const ComplexMatrix& h, int out_w, int out_h, int out_d,
           double fill) {
  Tape t;
  int d = h.dim();
  Tensor re(d, d), im(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      re.at(i, j) = h.re(i, j);
      im.at(i, j) = h.im(i, j);
    }
  TapeComplexMatrix hh{t.constant(std::move(re)), t.constant(std::move(im))};
  Var o = warp_op(t, img, hh, out_w, out_h, out_d, fill);
  Image result(out_w, out_h, out_d, img.channels, img.dims == 3);
  result.data = t.val(o).v;
  return result;
}

Image warp(const Image& img, const ComplexMatrix& h) {
  return warp(img, h, img.width, img.height, img.depth);
}

Tensor image_tensor(const Image& img) {
  Tensor t(static_cast<int>(img.n_pixels()), img.channels);
  t.v = img.data;
  return t;
}

}  // namespace odecme
