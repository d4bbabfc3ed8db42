// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/matexp.hpp"

#include <cmath>

#include "odecme/error.hpp"

namespace odecme {

namespace {

Tensor from_eigen(const Eigen::MatrixXd& m) {
  Tensor t(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < t.rows; ++i)
    for (int j = 0; j < t.cols; ++j) t.at(i, j) = m(i, j);
  return t;
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows, t.cols);
  for (int i = 0; i < t.rows; ++i)
    for (int j = 0; j < t.cols; ++j) m(i, j) = t.at(i, j);
  return m;
}

void check_input(const ComplexMatrix& b) {
  if (b.re.rows() != b.re.cols() || b.im.rows() != b.im.cols() || b.re.rows() != b.im.rows())
    throw Error::dim("mexp: input must be square with matching re/im parts");
  if (!b.re.allFinite() || !b.im.allFinite())
    throw Error::numeric("mexp: non-finite entries in input");
}

}  // namespace

TapeComplexMatrix complex_matmul_op(Tape& t, TapeComplexMatrix a, TapeComplexMatrix b) {
  // (A + iB)(C + iD) = (AC - BD) + i(AD + BC)
  Var re = t.sub(t.matmul(a.re, b.re), t.matmul(a.im, b.im));
  Var im = t.add(t.matmul(a.re, b.im), t.matmul(a.im, b.re));
  return {re, im};
}

TapeComplexMatrix mexp_op(Tape& t, TapeComplexMatrix b, int n_terms) {
  if (n_terms < 1) throw Error::invalid("mexp: n_terms must be >= 1");
  const Tensor& tre = t.val(b.re);
  const Tensor& tim = t.val(b.im);
  if (tre.rows != tre.cols || !t.val(b.im).same_shape(tre))
    throw Error::dim("mexp: input must be square with matching re/im parts");
  for (double x : tre.v)
    if (!std::isfinite(x)) throw Error::numeric("mexp: non-finite entries in input");
  for (double x : tim.v)
    if (!std::isfinite(x)) throw Error::numeric("mexp: non-finite entries in input");

  int d = tre.rows;
  Tensor eye(d, d);
  for (int i = 0; i < d; ++i) eye.at(i, i) = 1.0;

  TapeComplexMatrix acc{t.constant(eye), t.constant(Tensor(d, d))};
  TapeComplexMatrix term = acc;
  for (int n = 1; n <= n_terms; ++n) {
    TapeComplexMatrix prod = complex_matmul_op(t, term, b);
    term = {t.scale(prod.re, 1.0 / n), t.scale(prod.im, 1.0 / n)};
    acc = {t.add(acc.re, term.re), t.add(acc.im, term.im)};
  }
  return acc;
}

ComplexMatrix mexp(const ComplexMatrix& b, int n_terms) {
  check_input(b);
  // Route through the tape so every evaluation shares one arithmetic path.
  Tape t;
  TapeComplexMatrix in{t.constant(from_eigen(b.re)), t.constant(from_eigen(b.im))};
  TapeComplexMatrix out = mexp_op(t, in, n_terms);
  return {to_eigen(t.val(out.re)), to_eigen(t.val(out.im))};
}

ForwardInverse forward_inverse(GroupSpec g, const CoefficientVector& v, int n_terms) {
  CoefficientVector neg;
  neg.re = -v.re;
  neg.im = -v.im;
  return {mexp(assemble(g, v), n_terms), mexp(assemble(g, neg), n_terms)};
}

ComplexMatrix complex_matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.dim() != b.dim()) throw Error::dim("complex_matmul: dimension mismatch");
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

}  // namespace odecme
