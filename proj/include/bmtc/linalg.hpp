#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bmtc/matrix.hpp"

namespace bmtc {

// Thin SVD a = u * diag(singular_values) * vt with u (m x r), vt (r x n),
// r = min(m,n); singular values sorted nonincreasing, u columns and vt rows
// orthonormal.
struct SvdResult {
  Matrix u;
  std::vector<double> singular_values;
  Matrix vt;
};

// One-sided Jacobi SVD. Robust for the small dense matrices this library
// works with (slices up to a few hundred per side). Throws std::domain_error
// on non-finite input.
SvdResult thin_svd(const Matrix& a);

// Singular value soft thresholding: u * diag(max(sigma - delta, 0)) * vt.
// The proximal operator of delta * nuclear norm. Throws std::domain_error
// for delta < 0.
Matrix svt(const Matrix& a, double delta);

// Sum of singular values.
double nuclear_norm(const Matrix& a);

// Minimizer of 0.5*||h*a - x||^2 + (ratio/2)*||a - v||^2, i.e. the solution
// of (h'h + ratio*I) a = h'x + ratio*v. Requires ratio > 0 (throws
// std::domain_error otherwise), which makes the system uniformly SPD.
std::vector<double> ridge_block_solve(const Matrix& h,
                                      std::span<const double> x,
                                      std::span<const double> v, double ratio);

namespace detail {

// In-place SPD solve via Cholesky: g is row-major n x n (clobbered), rhs is
// overwritten with the solution. Throws std::runtime_error if a pivot is
// not positive.
void cholesky_solve_inplace(double* g, double* rhs, std::size_t n);

// Hot-path variant of ridge_block_solve on a column-major block: cols holds
// ell columns of length p. gram must hold ell*ell doubles, out and rhs may
// alias nothing. Writes the solution into out (length ell).
void ridge_solve_columns(const double* cols, std::size_t p, std::size_t ell,
                         const double* x, const double* v, double ratio,
                         double* gram, double* out);

}  // namespace detail

}  // namespace bmtc
