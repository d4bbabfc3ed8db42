// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "odecme/tape.hpp"

namespace odecme {

// Transformation families. Aff2 covers planar affine + projective-like
// distortions through the complex part; SE3 is rigid 3-D motion; Sim3 adds
// isotropic scale.
enum class GroupSpec { Aff2, SE3, Sim3 };

GroupSpec parse_group(const std::string& name);  // "aff2" | "se3" | "sim3"
std::string group_name(GroupSpec g);

// Homogeneous matrix dimension: 3 for Aff2, 4 for SE3/Sim3.
int matrix_dim(GroupSpec g);
// Number of basis generators: 6, 6, 7.
int n_generators(GroupSpec g);

// Pair of real matrices standing for Re + i*Im.
struct ComplexMatrix {
  Eigen::MatrixXd re, im;

  ComplexMatrix() = default;
  ComplexMatrix(Eigen::MatrixXd r, Eigen::MatrixXd i);
  static ComplexMatrix zero(int d) {
    return {Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
  }
  static ComplexMatrix identity(int d) {
    return {Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Zero(d, d)};
  }
  int dim() const { return static_cast<int>(re.rows()); }
};

// Generator coefficients. re and im have length n_generators; a purely real
// transform has im identically zero.
struct CoefficientVector {
  Eigen::VectorXd re, im;

  CoefficientVector() = default;
  static CoefficientVector zero(GroupSpec g);
  int size() const { return static_cast<int>(re.size()); }
};

// The fixed generator basis for a group, in declaration order. The matrices
// are shared by the real and imaginary parts of the algebra element.
const std::vector<Eigen::MatrixXd>& generators(GroupSpec g);

// B = sum_k v.re[k] * G_k  +  i * sum_k v.im[k] * G_k
ComplexMatrix assemble(GroupSpec g, const CoefficientVector& v);

// Per-generator on/off switches. Masked-out coefficients are pinned to zero
// so optimization explores only a subgroup (e.g. translations only).
using GeneratorMask = std::vector<bool>;

GeneratorMask full_mask(GroupSpec g);
// Comma-separated 0/1 list, e.g. "1,1,0,0,0,0".
GeneratorMask parse_mask(const std::string& text, GroupSpec g);
void apply_mask(CoefficientVector& v, const GeneratorMask& mask);

// Flat layout used by the optimizer and the coefficient ODE: [re] for real
// mode, [re || im] for complex mode.
int flat_size(GroupSpec g, bool complex_coeffs);
std::vector<double> flatten(const CoefficientVector& v, bool complex_coeffs);
CoefficientVector unflatten(const double* flat, GroupSpec g, bool complex_coeffs);

// Row k holds vec(G_k), row-major; shape (n_generators, d*d). Used to
// assemble algebra elements on the tape with one matmul.
Tensor generator_rows(GroupSpec g);

// Tape counterpart of assemble(): coeffs is a flat row vector (see flatten).
// Returns {B_re, B_im}; in real mode B_im is a zero constant.
struct TapeComplexMatrix {
  Var re, im;
};
TapeComplexMatrix assemble_op(Tape& t, GroupSpec g, Var coeffs, bool complex_coeffs);

}  // namespace odecme
