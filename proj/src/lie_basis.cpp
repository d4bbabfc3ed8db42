// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/lie_basis.hpp"

#include <algorithm>

#include "odecme/error.hpp"

namespace odecme {

namespace {

std::vector<Eigen::MatrixXd> make_aff2() {
  std::vector<Eigen::MatrixXd> g(6, Eigen::MatrixXd::Zero(3, 3));
  g[0](0, 2) = 1.0;  // translation x
  g[1](1, 2) = 1.0;  // translation y
  g[2](0, 1) = 1.0;  // shear
  g[3](1, 0) = 1.0;  // shear
  g[4](0, 0) = 1.0;  // anisotropic stretch
  g[4](1, 1) = -1.0;
  g[5](1, 1) = -1.0;  // stretch against the homogeneous row
  g[5](2, 2) = 1.0;
  return g;
}

std::vector<Eigen::MatrixXd> make_se3() {
  std::vector<Eigen::MatrixXd> g(6, Eigen::MatrixXd::Zero(4, 4));
  g[0](0, 3) = 1.0;  // translation x
  g[1](1, 3) = 1.0;  // translation y
  g[2](2, 3) = 1.0;  // translation z
  g[3](1, 2) = -1.0;  // rotation about x
  g[3](2, 1) = 1.0;
  g[4](0, 2) = 1.0;  // rotation about y
  g[4](2, 0) = -1.0;
  g[5](0, 1) = -1.0;  // rotation about z
  g[5](1, 0) = 1.0;
  return g;
}

std::vector<Eigen::MatrixXd> make_sim3() {
  std::vector<Eigen::MatrixXd> g = make_se3();
  Eigen::MatrixXd scale = Eigen::MatrixXd::Zero(4, 4);
  scale(3, 3) = -1.0;  // isotropic scale via the homogeneous coordinate
  g.push_back(scale);
  return g;
}

}  // namespace

GroupSpec parse_group(const std::string& name) {
  if (name == "aff2") return GroupSpec::Aff2;
  if (name == "se3") return GroupSpec::SE3;
  if (name == "sim3") return GroupSpec::Sim3;
  throw Error::invalid("unknown group '" + name + "' (expected aff2, se3 or sim3)");
}

std::string group_name(GroupSpec g) {
  switch (g) {
    case GroupSpec::Aff2: return "aff2";
    case GroupSpec::SE3: return "se3";
    case GroupSpec::Sim3: return "sim3";
  }
  throw Error::invalid("bad GroupSpec");
}

int matrix_dim(GroupSpec g) { return g == GroupSpec::Aff2 ? 3 : 4; }

int n_generators(GroupSpec g) { return g == GroupSpec::Sim3 ? 7 : 6; }

ComplexMatrix::ComplexMatrix(Eigen::MatrixXd r, Eigen::MatrixXd i)
    : re(std::move(r)), im(std::move(i)) {
  if (re.rows() != re.cols() || im.rows() != im.cols() || re.rows() != im.rows())
    throw Error::dim("ComplexMatrix: parts must be square and equally sized");
}

CoefficientVector CoefficientVector::zero(GroupSpec g) {
  CoefficientVector v;
  v.re = Eigen::VectorXd::Zero(n_generators(g));
  v.im = Eigen::VectorXd::Zero(n_generators(g));
  return v;
}

const std::vector<Eigen::MatrixXd>& generators(GroupSpec g) {
  static const std::vector<Eigen::MatrixXd> aff2 = make_aff2();
  static const std::vector<Eigen::MatrixXd> se3 = make_se3();
  static const std::vector<Eigen::MatrixXd> sim3 = make_sim3();
  switch (g) {
    case GroupSpec::Aff2: return aff2;
    case GroupSpec::SE3: return se3;
    case GroupSpec::Sim3: return sim3;
  }
  throw Error::invalid("bad GroupSpec");
}

ComplexMatrix assemble(GroupSpec g, const CoefficientVector& v) {
  int n = n_generators(g);
  if (v.re.size() != n || v.im.size() != n)
    throw Error::dim("assemble: expected " + std::to_string(n) + " coefficients");
  int d = matrix_dim(g);
  ComplexMatrix b = ComplexMatrix::zero(d);
  const auto& gen = generators(g);
  for (int k = 0; k < n; ++k) {
    b.re += v.re[k] * gen[static_cast<size_t>(k)];
    b.im += v.im[k] * gen[static_cast<size_t>(k)];
  }
  return b;
}

GeneratorMask full_mask(GroupSpec g) {
  return GeneratorMask(static_cast<size_t>(n_generators(g)), true);
}

GeneratorMask parse_mask(const std::string& text, GroupSpec g) {
  GeneratorMask mask;
  std::string tok;
  for (size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ',') {
      if (tok == "1")
        mask.push_back(true);
      else if (tok == "0")
        mask.push_back(false);
      else
        throw Error::invalid("mask entries must be 0 or 1, got '" + tok + "'");
      tok.clear();
    } else if (!std::isspace(static_cast<unsigned char>(text[i]))) {
      tok.push_back(text[i]);
    }
  }
  if (static_cast<int>(mask.size()) != n_generators(g))
    throw Error::invalid("mask needs " + std::to_string(n_generators(g)) + " entries for " +
                         group_name(g));
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw Error::invalid("mask disables every generator");
  return mask;
}

void apply_mask(CoefficientVector& v, const GeneratorMask& mask) {
  if (static_cast<int>(mask.size()) != v.size())
    throw Error::dim("apply_mask: mask length mismatch");
  for (int k = 0; k < v.size(); ++k)
    if (!mask[static_cast<size_t>(k)]) {
      v.re[k] = 0.0;
      v.im[k] = 0.0;
    }
}

int flat_size(GroupSpec g, bool complex_coeffs) {
  return n_generators(g) * (complex_coeffs ? 2 : 1);
}

std::vector<double> flatten(const CoefficientVector& v, bool complex_coeffs) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(v.size()) * (complex_coeffs ? 2 : 1));
  for (int k = 0; k < v.size(); ++k) out.push_back(v.re[k]);
  if (complex_coeffs)
    for (int k = 0; k < v.size(); ++k) out.push_back(v.im[k]);
  return out;
}

CoefficientVector unflatten(const double* flat, GroupSpec g, bool complex_coeffs) {
  int n = n_generators(g);
  CoefficientVector v = CoefficientVector::zero(g);
  for (int k = 0; k < n; ++k) v.re[k] = flat[k];
  if (complex_coeffs)
    for (int k = 0; k < n; ++k) v.im[k] = flat[n + k];
  return v;
}

Tensor generator_rows(GroupSpec g) {
  int n = n_generators(g);
  int d = matrix_dim(g);
  Tensor rows(n, d * d);
  const auto& gen = generators(g);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) rows.at(k, i * d + j) = gen[static_cast<size_t>(k)](i, j);
  return rows;
}

TapeComplexMatrix assemble_op(Tape& t, GroupSpec g, Var coeffs, bool complex_coeffs) {
  int n = n_generators(g);
  int d = matrix_dim(g);
  const Tensor& c = t.val(coeffs);
  if (c.rows != 1 || c.cols != flat_size(g, complex_coeffs))
    throw Error::dim("assemble_op: coefficient vector has wrong length");
  Var basis = t.constant(generator_rows(g));
  Var re_part = t.reshape(t.matmul(t.slice_cols(coeffs, 0, n), basis), d, d);
  Var im_part;
  if (complex_coeffs)
    im_part = t.reshape(t.matmul(t.slice_cols(coeffs, n, n), basis), d, d);
  else
    im_part = t.constant(Tensor(d, d));
  return {re_part, im_part};
}

}  // namespace odecme
