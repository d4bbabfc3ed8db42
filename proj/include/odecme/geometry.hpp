// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "odecme/lie_basis.hpp"
#include "odecme/tape.hpp"

namespace odecme {

// N x k point coordinates in canonical units ([-1,1] per axis), k in {2,3}.
using PointSet = Eigen::MatrixXd;

// Denominators below this are treated as a degenerate transform and raise a
// hard error; the optimizer never reaches them from the zero element, so
// clamping would only mask a real failure.
inline constexpr double kDenominatorEps = 1e-12;

// Scratch values from mapping one point. r and s are the real and imaginary
// homogeneous images of the point; out holds the combined coordinates.
struct PointJet {
  double r[4];
  double s[4];
  double out[3];
  double dinv;  // 1 / ((r_last)^2 + (s_last)^2)
};

// Maps one point through the paired-matrix transform:
//   out_j = (r_j * r_K + s_j * s_K) / (r_K^2 + s_K^2),  K = d - 1,
// where r = Re(H) * [in, 1] and s = Im(H) * [in, 1]. With Im(H) = 0 this is
// classical homogeneous normalization. Matrices are d x d row-major; `in`
// has d - 1 coordinates. Returns false when the denominator is below
// kDenominatorEps.
bool transform_point_jet(const double* hre, const double* him, int d, const double* in,
                         PointJet& jet);

// Reverse-mode pullback of the per-point map: upstream coordinate gradients
// gout (k values) become gradients gr, gs (d values each) with respect to the
// homogeneous images r and s held in the jet.
void point_pullback(const PointJet& jet, int d, const double* gout, double* gr, double* gs);

// Applies the map to every row of pts. H must be (k+1) x (k+1).
PointSet transform_points(const ComplexMatrix& h, const PointSet& pts);

// Tape counterpart; gradients flow to both matrix parts and to pts.
Var transform_points_op(Tape& t, TapeComplexMatrix h, Var pts);

// One transformed grid line, sampled as a polyline.
struct Polyline {
  int id = 0;
  Eigen::MatrixX2d pts;
};

// Transforms lines_per_axis uniformly spaced horizontal + vertical lines
// covering [-1,1]^2. 2-D transforms only.
std::vector<Polyline> render_grid(const ComplexMatrix& h, int lines_per_axis,
                                  int samples_per_line);

// Max distance from any sample to the first-to-last chord; zero for exactly
// straight polylines.
double collinearity_residual(const Polyline& line);

// CSV rows "line,x,y" for external plotting.
void write_polylines_csv(const std::string& path, const std::vector<Polyline>& lines);

}  // namespace odecme
