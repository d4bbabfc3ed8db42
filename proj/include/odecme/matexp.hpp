// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "odecme/lie_basis.hpp"
#include "odecme/tape.hpp"

namespace odecme {

inline constexpr int kDefaultExpTerms = 10;

// Truncated power series sum_{n=0..n_terms} B^n / n!, evaluated with complex
// arithmetic realized as paired real matrix products. No scaling-and-squaring:
// algebra elements stay small during optimization and the plain series keeps
// the reverse pass simple. Terms are accumulated iteratively,
// term_{n+1} = term_n * B / (n+1), so no factorial is ever formed.
ComplexMatrix mexp(const ComplexMatrix& b, int n_terms = kDefaultExpTerms);

// H = mexp(assemble(v)), H_inv = mexp(assemble(-v)).
struct ForwardInverse {
  ComplexMatrix h, h_inv;
};
ForwardInverse forward_inverse(GroupSpec g, const CoefficientVector& v,
                               int n_terms = kDefaultExpTerms);

// Tape counterpart; gradients flow to every entry of b.
TapeComplexMatrix mexp_op(Tape& t, TapeComplexMatrix b, int n_terms = kDefaultExpTerms);

// Complex matrix product on the tape: (a.re + i a.im)(b.re + i b.im).
TapeComplexMatrix complex_matmul_op(Tape& t, TapeComplexMatrix a, TapeComplexMatrix b);

// Plain complex product, for inverse checks and composition.
ComplexMatrix complex_matmul(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace odecme
