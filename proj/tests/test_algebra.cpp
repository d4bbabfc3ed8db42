// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <unsupported/Eigen/MatrixFunctions>

#include "odecme/error.hpp"
#include "odecme/geometry.hpp"
#include "odecme/lie_basis.hpp"
#include "odecme/matexp.hpp"
#include "odecme/rng.hpp"

using namespace odecme;
using CMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

namespace {

CMat to_complex(const ComplexMatrix& m) {
  CMat c(m.re.rows(), m.re.cols());
  for (int i = 0; i < m.re.rows(); ++i)
    for (int j = 0; j < m.re.cols(); ++j)
      c(i, j) = {m.re(i, j), m.im(i, j)};
  return c;
}

// independent truncated-series route in one complex matrix type.
CMat series_exp(const CMat& b, int n_terms) {
  CMat acc = CMat::Identity(b.rows(), b.cols());
  CMat term = CMat::Identity(b.rows(), b.cols());
  for (int n = 1; n <= n_terms; ++n) {
    term = (term * b / static_cast<double>(n)).eval();
    acc += term;
  }
  return acc;
}

ComplexMatrix random_element(Rng& rng, GroupSpec g, double sd_re, double sd_im) {
  CoefficientVector v = CoefficientVector::zero(g);
  for (int i = 0; i < v.size(); ++i) {
    v.re[i] = rng.normal(0.0, sd_re);
    v.im[i] = rng.normal(0.0, sd_im);
  }
  return assemble(g, v);
}

}  // namespace

TEST_CASE("group ranks and generator counts") {
  CHECK(matrix_dim(GroupSpec::Aff2) == 3);
  CHECK(matrix_dim(GroupSpec::SE3) == 4);
  CHECK(matrix_dim(GroupSpec::Sim3) == 4);
  CHECK(n_generators(GroupSpec::Aff2) == 6);
  CHECK(n_generators(GroupSpec::SE3) == 6);
  CHECK(n_generators(GroupSpec::Sim3) == 7);
  CHECK(parse_group("sim3") == GroupSpec::Sim3);
  CHECK(group_name(GroupSpec::SE3) == "se3");
  CHECK_THROWS_AS(parse_group("so2"), Error);
}

TEST_CASE("selected generator entries") {
  const auto& a = generators(GroupSpec::Aff2);
  CHECK(a[0](0, 2) == 1.0);               // x shift
  CHECK(a[1](1, 2) == 1.0);               // y shift
  CHECK(a[4](0, 0) == 1.0);               // stretch
  CHECK(a[4](1, 1) == -1.0);
  CHECK(a[5](1, 1) == -1.0);              // second trace-free diagonal
  CHECK(a[5](2, 2) == 1.0);
  const auto& s = generators(GroupSpec::SE3);
  CHECK(s[3](1, 2) == -1.0);              // rotation about x
  CHECK(s[3](2, 1) == 1.0);
  const auto& m = generators(GroupSpec::Sim3);
  CHECK(m[6](3, 3) == -1.0);              // scale slot
  for (const auto& gen : a) CHECK(gen.rows() == 3);
  for (const auto& gen : m) CHECK(gen.rows() == 4);
}

TEST_CASE("exponential of a rotation element is the closed-form rotation") {
  double th = 0.3;
  CoefficientVector v = CoefficientVector::zero(GroupSpec::Aff2);
  v.re[2] = -th;  // upper shear
  v.re[3] = th;   // lower shear
  ComplexMatrix h = mexp(assemble(GroupSpec::Aff2, v));
  CHECK(h.re(0, 0) == doctest::Approx(std::cos(th)).epsilon(1e-10));
  CHECK(h.re(0, 1) == doctest::Approx(-std::sin(th)).epsilon(1e-10));
  CHECK(h.re(1, 0) == doctest::Approx(std::sin(th)).epsilon(1e-10));
  CHECK(h.re(2, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.im.cwiseAbs().maxCoeff() == 0.0);

  CoefficientVector w = CoefficientVector::zero(GroupSpec::SE3);
  w.re[5] = th;  // rotation about z
  ComplexMatrix hz = mexp(assemble(GroupSpec::SE3, w));
  CHECK(hz.re(0, 0) == doctest::Approx(std::cos(th)).epsilon(1e-10));
  CHECK(hz.re(1, 0) == doctest::Approx(std::sin(th)).epsilon(1e-10));
  CHECK(hz.re(2, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exponential of pure translations is exact") {
  CoefficientVector v = CoefficientVector::zero(GroupSpec::Aff2);
  v.re[0] = 0.7;
  v.re[1] = -1.2;
  ComplexMatrix h = mexp(assemble(GroupSpec::Aff2, v), 3);
  CHECK(h.re(0, 2) == 0.7);  // nilpotent: series terminates, no rounding
  CHECK(h.re(1, 2) == -1.2);
  CHECK(h.re(0, 0) == 1.0);
  CHECK(h.re(0, 1) == 0.0);
}

TEST_CASE("split re/im recursion equals one straight-line complex series") {
  Rng rng(41);
  for (int k = 0; k < 20; ++k) {
    GroupSpec g = k % 2 ? GroupSpec::Aff2 : GroupSpec::Sim3;
    ComplexMatrix b = random_element(rng, g, 0.4, 0.4);
    ComplexMatrix got = mexp(b);
    CMat want = series_exp(to_complex(b), kDefaultExpTerms);
    for (int i = 0; i < b.dim(); ++i)
      for (int j = 0; j < b.dim(); ++j) {
        CHECK(got.re(i, j) == doctest::Approx(want(i, j).real()).epsilon(1e-13));
        CHECK(got.im(i, j) == doctest::Approx(want(i, j).imag()).epsilon(1e-13));
      }
  }
}

TEST_CASE("real input stays exactly real and matches the real series") {
  Rng rng(42);
  ComplexMatrix b = random_element(rng, GroupSpec::Aff2, 0.5, 0.0);
  ComplexMatrix h = mexp(b);
  CHECK(h.im.cwiseAbs().maxCoeff() == 0.0);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(3, 3), term = acc;
  for (int n = 1; n <= kDefaultExpTerms; ++n) {
    term = (term * b.re / n).eval();
    acc += term;
  }
  CHECK((h.re - acc).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("series agrees with a scaling-and-squaring exponential") {
  Rng rng(43);
  for (int k = 0; k < 5; ++k) {
    ComplexMatrix b = random_element(rng, GroupSpec::SE3, 0.3, 0.3);
    CMat want = to_complex(b).exp();
    ComplexMatrix got = mexp(b);
    double err = (to_complex(got) - want).cwiseAbs().maxCoeff() /
                 want.cwiseAbs().maxCoeff();
    CHECK(err < 1e-6);
  }
}

TEST_CASE("complex matmul splits match std::complex products") {
  Rng rng(44);
  ComplexMatrix a = random_element(rng, GroupSpec::Aff2, 0.8, 0.8);
  ComplexMatrix b = random_element(rng, GroupSpec::Aff2, 0.8, 0.8);
  ComplexMatrix c = complex_matmul(a, b);
  CMat want = to_complex(a) * to_complex(b);
  CHECK((to_complex(c) - want).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("masks parse and apply") {
  GeneratorMask m = parse_mask("1,1,0,0,0,0", GroupSpec::Aff2);
  CHECK(m.size() == 6);
  CHECK(m[0]);
  CHECK_FALSE(m[2]);
  CHECK_THROWS_AS(parse_mask("1,1", GroupSpec::Aff2), Error);
  CHECK_THROWS_AS(parse_mask("1,1,2,0,0,0", GroupSpec::Aff2), Error);

  CoefficientVector v = CoefficientVector::zero(GroupSpec::Aff2);
  for (int i = 0; i < 6; ++i) {
    v.re[i] = 1.0;
    v.im[i] = 2.0;
  }
  apply_mask(v, m);
  CHECK(v.re[0] == 1.0);
  CHECK(v.re[2] == 0.0);
  CHECK(v.im[2] == 0.0);  // masking a generator silences both parts
}

TEST_CASE("flatten and unflatten round-trip") {
  Rng rng(45);
  CoefficientVector v = CoefficientVector::zero(GroupSpec::Sim3);
  for (int i = 0; i < v.size(); ++i) {
    v.re[i] = rng.normal();
    v.im[i] = rng.normal();
  }
  CHECK(flat_size(GroupSpec::Sim3, true) == 14);
  CHECK(flat_size(GroupSpec::Sim3, false) == 7);
  std::vector<double> flat = flatten(v, true);
  CoefficientVector w = unflatten(flat.data(), GroupSpec::Sim3, true);
  CHECK((v.re - w.re).cwiseAbs().maxCoeff() == 0.0);
  CHECK((v.im - w.im).cwiseAbs().maxCoeff() == 0.0);

  std::vector<double> flat_r = flatten(v, false);
  CoefficientVector wr = unflatten(flat_r.data(), GroupSpec::Sim3, false);
  CHECK((v.re - wr.re).cwiseAbs().maxCoeff() == 0.0);
  CHECK(wr.im.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("point transform is the real part of the complex quotient") {
  Rng rng(46);
  ComplexMatrix h = mexp(random_element(rng, GroupSpec::Aff2, 0.3, 0.2));
  PointSet pts(4, 2);
  for (int i = 0; i < 8; ++i) pts.data()[i] = rng.uniform(-0.8, 0.8);
  PointSet out = transform_points(h, pts);
  CMat hc = to_complex(h);
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector3cd x(pts(i, 0), pts(i, 1), 1.0);
    Eigen::Vector3cd z = hc * x;
    for (int j = 0; j < 2; ++j) {
      std::complex<double> q = z[j] / z[2];
      CHECK(out(i, j) == doctest::Approx(q.real()).epsilon(1e-12));
    }
  }
}

TEST_CASE("identity transform moves nothing") {
  PointSet pts(2, 3);
  pts << 0.1, -0.2, 0.5, 0.0, 0.9, -0.4;
  PointSet out = transform_points(ComplexMatrix::identity(4), pts);
  CHECK((out - pts).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vanishing denominator is a numeric error") {
  ComplexMatrix h = ComplexMatrix::identity(3);
  h.re(2, 2) = 0.0;  // bottom row annihilates the homogeneous coordinate
  PointSet pts(1, 2);
  pts << 0.0, 0.0;
  try {
    transform_points(h, pts);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Numeric);
  }
}

TEST_CASE("forward and inverse exponentials invert each other") {
  Rng rng(47);
  CoefficientVector v = CoefficientVector::zero(GroupSpec::Aff2);
  for (int i = 0; i < 6; ++i) {
    v.re[i] = rng.normal(0.0, 0.2);
    v.im[i] = rng.normal(0.0, 0.1);
  }
  ForwardInverse fi = forward_inverse(GroupSpec::Aff2, v);
  ComplexMatrix prod = complex_matmul(fi.h, fi.h_inv);
  CHECK((prod.re - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(prod.im.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("grid polylines stay collinear under an affine map") {
  CoefficientVector v = CoefficientVector::zero(GroupSpec::Aff2);
  v.re[2] = 0.2;  // pure shear: lines map to lines
  ComplexMatrix h = mexp(assemble(GroupSpec::Aff2, v));
  auto lines = render_grid(h, 4, 9);
  CHECK(lines.size() == 8);  // 4 per axis
  for (const auto& line : lines) {
    CHECK(line.pts.rows() == 9);
    CHECK(collinearity_residual(line) < 1e-9);
  }
}
