// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "odecme/error.hpp"

namespace odecme {

bool transform_point_jet(const double* hre, const double* him, int d, const double* in,
                         PointJet& jet) {
  double p[4];
  int k = d - 1;
  for (int j = 0; j < k; ++j) p[j] = in[j];
  p[k] = 1.0;
  for (int a = 0; a < d; ++a) {
    double ra = 0.0, sa = 0.0;
    const double* rowr = hre + a * d;
    const double* rowi = him + a * d;
    for (int b = 0; b < d; ++b) {
      ra += rowr[b] * p[b];
      sa += rowi[b] * p[b];
    }
    jet.r[a] = ra;
    jet.s[a] = sa;
  }
  double denom = jet.r[k] * jet.r[k] + jet.s[k] * jet.s[k];
  if (!(denom > kDenominatorEps)) return false;
  jet.dinv = 1.0 / denom;
  for (int j = 0; j < k; ++j)
    jet.out[j] = (jet.r[j] * jet.r[k] + jet.s[j] * jet.s[k]) * jet.dinv;
  return true;
}

namespace {

void check_transform_dims(const ComplexMatrix& h, int k) {
  if (k != 2 && k != 3) throw Error::dim("transform_points: points must have 2 or 3 columns");
  if (h.dim() != k + 1)
    throw Error::dim("transform_points: expected a " + std::to_string(k + 1) + "x" +
                     std::to_string(k + 1) + " transform for " + std::to_string(k) +
                     "-D points, got " + std::to_string(h.dim()));
}

}  // namespace

void point_pullback(const PointJet& jet, int d, const double* gout, double* gr, double* gs) {
  int k = d - 1;
  double rk = jet.r[k], sk = jet.s[k];
  double grk = 0.0, gsk = 0.0;
  for (int j = 0; j < k; ++j) {
    gr[j] = gout[j] * rk * jet.dinv;
    gs[j] = gout[j] * sk * jet.dinv;
    grk += gout[j] * (jet.r[j] - 2.0 * jet.out[j] * rk) * jet.dinv;
    gsk += gout[j] * (jet.s[j] - 2.0 * jet.out[j] * sk) * jet.dinv;
  }
  gr[k] = grk;
  gs[k] = gsk;
}

PointSet transform_points(const ComplexMatrix& h, const PointSet& pts) {
  int k = static_cast<int>(pts.cols());
  check_transform_dims(h, k);
  int d = k + 1;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> hre = h.re, him = h.im;
  PointSet out(pts.rows(), k);
  double in[3];
  PointJet jet;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (int j = 0; j < k; ++j) in[j] = pts(i, j);
    if (!transform_point_jet(hre.data(), him.data(), d, in, jet))
      throw Error::numeric("singular transform: denominator below 1e-12 at point index " +
                           std::to_string(i));
    for (int j = 0; j < k; ++j) out(i, j) = jet.out[j];
  }
  return out;
}

Var transform_points_op(Tape& t, TapeComplexMatrix h, Var pts) {
  const Tensor& tp = t.val(pts);
  const Tensor& tre = t.val(h.re);
  const Tensor& tim = t.val(h.im);
  int k = tp.cols;
  if (k != 2 && k != 3) throw Error::dim("transform_points: points must have 2 or 3 columns");
  int d = k + 1;
  if (tre.rows != d || tre.cols != d || !tim.same_shape(tre))
    throw Error::dim("transform_points: transform must be " + std::to_string(d) + "x" +
                     std::to_string(d));

  Tensor out(tp.rows, k);
  PointJet jet;
  for (int i = 0; i < tp.rows; ++i) {
    if (!transform_point_jet(tre.v.data(), tim.v.data(), d, &tp.v[static_cast<size_t>(i) * k],
                             jet))
      throw Error::numeric("singular transform: denominator below 1e-12 at point index " +
                           std::to_string(i));
    for (int j = 0; j < k; ++j) out.at(i, j) = jet.out[j];
  }

  // Recomputes the per-point jets during the backward sweep; forward values
  // live on the tape, so no per-point state is stored.
  auto back = [&t, h, pts, d, k](const Tensor& gout, const Tape::GradSink& accum) {
    const Tensor& vre = t.val(h.re);
    const Tensor& vim = t.val(h.im);
    const Tensor& vp = t.val(pts);
    bool want_pts = t.requires_grad(pts);
    Tensor ghre(d, d), ghim(d, d);
    Tensor gpts(vp.rows, vp.cols);
    PointJet jet2;
    double gr[4], gs[4], p[4];
    for (int i = 0; i < vp.rows; ++i) {
      const double* in = &vp.v[static_cast<size_t>(i) * k];
      transform_point_jet(vre.v.data(), vim.v.data(), d, in, jet2);
      point_pullback(jet2, d, &gout.v[static_cast<size_t>(i) * k], gr, gs);
      for (int j = 0; j < k; ++j) p[j] = in[j];
      p[k] = 1.0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          ghre.at(a, b) += gr[a] * p[b];
          ghim.at(a, b) += gs[a] * p[b];
        }
      if (want_pts)
        for (int b = 0; b < k; ++b) {
          double acc = 0.0;
          for (int a = 0; a < d; ++a)
            acc += gr[a] * vre.at(a, b) + gs[a] * vim.at(a, b);
          gpts.at(i, b) = acc;
        }
    }
    accum(0, ghre);
    accum(1, ghim);
    if (want_pts) accum(2, gpts);
  };
  return t.custom(std::move(out), {h.re, h.im, pts}, back);
}

std::vector<Polyline> render_grid(const ComplexMatrix& h, int lines_per_axis,
                                  int samples_per_line) {
  if (lines_per_axis < 2) throw Error::invalid("render_grid: need at least 2 lines per axis");
  if (samples_per_line < 2) throw Error::invalid("render_grid: need at least 2 samples per line");
  if (h.dim() != 3) throw Error::dim("render_grid: 2-D transforms only");

  std::vector<Polyline> lines;
  int id = 0;
  auto coord = [](int i, int n) { return -1.0 + 2.0 * i / (n - 1); };
  for (int axis = 0; axis < 2; ++axis) {
    for (int i = 0; i < lines_per_axis; ++i) {
      double fixed = coord(i, lines_per_axis);
      PointSet pts(samples_per_line, 2);
      for (int j = 0; j < samples_per_line; ++j) {
        double moving = coord(j, samples_per_line);
        pts(j, 0) = axis == 0 ? moving : fixed;
        pts(j, 1) = axis == 0 ? fixed : moving;
      }
      Polyline line;
      line.id = id++;
      line.pts = transform_points(h, pts);
      lines.push_back(std::move(line));
    }
  }
  return lines;
}

double collinearity_residual(const Polyline& line) {
  Eigen::Index n = line.pts.rows();
  if (n < 3) return 0.0;
  Eigen::Vector2d a = line.pts.row(0);
  Eigen::Vector2d u = Eigen::Vector2d(line.pts.row(n - 1)) - a;
  double len = u.norm();
  double worst = 0.0;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    Eigen::Vector2d w = Eigen::Vector2d(line.pts.row(i)) - a;
    double dist = len > 0.0 ? std::abs(u.x() * w.y() - u.y() * w.x()) / len : w.norm();
    worst = std::max(worst, dist);
  }
  return worst;
}

void write_polylines_csv(const std::string& path, const std::vector<Polyline>& lines) {
  std::ofstream out(path);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  out << "line,x,y\n";
  char buf[80];
  for (const auto& line : lines)
    for (Eigen::Index i = 0; i < line.pts.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", line.id, line.pts(i, 0),
                    line.pts(i, 1));
      out << buf;
    }
  if (!out.flush()) throw Error::io("failed writing '" + path + "'");
}

}  // namespace odecme
