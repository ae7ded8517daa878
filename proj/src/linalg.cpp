#include "bmtc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bmtc/kernels.hpp"

namespace bmtc {

namespace {

// One-sided Jacobi on a column-major m x n workspace with m >= n: rotates
// column pairs until all are mutually orthogonal, accumulating the rotations
// into the column-major n x n matrix v.
void jacobi_orthogonalize(std::vector<double>& w, std::vector<double>& v,
                          std::size_t m, std::size_t n) {
  const auto& k = kernels::ops();
  const double tol = 8.0 * std::numeric_limits<double>::epsilon();
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* wp = w.data() + p * m;
        double* wq = w.data() + q * m;
        const double app = k.sum_sq(wp, m);
        const double aqq = k.sum_sq(wq, m);
        const double apq = k.dot(wp, wq, m);
        if (apq == 0.0 || std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t =
            std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t r = 0; r < m; ++r) {
          const double a = wp[r], b = wq[r];
          wp[r] = cs * a - sn * b;
          wq[r] = sn * a + cs * b;
        }
        double* vp = v.data() + p * n;
        double* vq = v.data() + q * n;
        for (std::size_t r = 0; r < n; ++r) {
          const double a = vp[r], b = vq[r];
          vp[r] = cs * a - sn * b;
          vq[r] = sn * a + cs * b;
        }
      }
    }
    if (!rotated) break;
  }
}

// Fills u columns whose singular value vanished with vectors orthonormal to
// every column already present, so u stays an orthonormal basis.
void complete_basis(Matrix& u, std::vector<bool>& filled) {
  const std::size_t m = u.rows(), r = u.cols();
  for (std::size_t j = 0; j < r; ++j) {
    if (filled[j]) continue;
    for (std::size_t cand = 0; cand < m; ++cand) {
      std::vector<double> col(m, 0.0);
      col[cand] = 1.0;
      for (std::size_t o = 0; o < r; ++o) {
        if (!filled[o]) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += col[i] * u(i, o);
        for (std::size_t i = 0; i < m; ++i) col[i] -= proj * u(i, o);
      }
      double norm = 0.0;
      for (double x : col) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0.5) {
        for (std::size_t i = 0; i < m; ++i) u(i, j) = col[i] / norm;
        filled[j] = true;
        break;
      }
    }
  }
}

// SVD of a with rows >= cols; returns u (m x n), sigma (n), vt (n x n).
SvdResult thin_svd_tall(const Matrix& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> w(m * n);  // column-major copy of a
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) w[c * m + r] = a(r, c);
  std::vector<double> v(n * n, 0.0);  // column-major, starts as identity
  for (std::size_t c = 0; c < n; ++c) v[c * n + c] = 1.0;

  jacobi_orthogonalize(w, v, m, n);

  const auto& k = kernels::ops();
  std::vector<double> sigma(n);
  for (std::size_t c = 0; c < n; ++c)
    sigma[c] = std::sqrt(k.sum_sq(w.data() + c * m, m));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  std::vector<bool> filled(n, false);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.singular_values[c] = sigma[src];
    for (std::size_t r = 0; r < n; ++r) out.vt(c, r) = v[src * n + r];
    if (sigma[src] > 0.0) {
      const double inv = 1.0 / sigma[src];
      for (std::size_t r = 0; r < m; ++r) out.u(r, c) = w[src * m + r] * inv;
      filled[c] = true;
    }
  }
  complete_basis(out.u, filled);
  return out;
}

}  // namespace

SvdResult thin_svd(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0)
    throw std::invalid_argument("thin_svd: empty matrix");
  if (!a.all_finite())
    throw std::domain_error("thin_svd: input has non-finite entries");
  if (a.rows() >= a.cols()) return thin_svd_tall(a);

  // a = (u' s v't)' of the transpose: swap the roles of u and v.
  Matrix at(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) at(c, r) = a(r, c);
  SvdResult t = thin_svd_tall(at);
  const std::size_t r = t.singular_values.size();
  SvdResult out{Matrix(a.rows(), r), std::move(t.singular_values),
                Matrix(r, a.cols())};
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < r; ++j) out.u(i, j) = t.vt(j, i);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.vt(i, j) = t.u(j, i);
  return out;
}

Matrix svt(const Matrix& a, double delta) {
  if (delta < 0.0) throw std::domain_error("svt: negative threshold");
  SvdResult s = thin_svd(a);
  Matrix out(a.rows(), a.cols());
  const auto& k = kernels::ops();
  for (std::size_t j = 0; j < s.singular_values.size(); ++j) {
    const double shrunk = std::max(s.singular_values[j] - delta, 0.0);
    if (shrunk == 0.0) continue;  // sigma sorted: everything after is zero too
    for (std::size_t r = 0; r < a.rows(); ++r)
      k.axpy(out.row(r).data(), s.vt.row(j).data(), shrunk * s.u(r, j),
             a.cols());
  }
  return out;
}

double nuclear_norm(const Matrix& a) {
  SvdResult s = thin_svd(a);
  double sum = 0.0;
  for (double v : s.singular_values) sum += v;
  return sum;
}

namespace detail {

void cholesky_solve_inplace(double* g, double* rhs, std::size_t n) {
  // g <- lower Cholesky factor
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = g[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= g[i * n + k] * g[j * n + k];
      if (i == j) {
        if (s <= 0.0)
          throw std::runtime_error("cholesky: matrix not positive definite");
        g[i * n + i] = std::sqrt(s);
      } else {
        g[i * n + j] = s / g[j * n + j];
      }
    }
  }
  // forward then backward substitution
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= g[i * n + k] * rhs[k];
    rhs[i] = s / g[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = rhs[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= g[k * n + ii] * rhs[k];
    rhs[ii] = s / g[ii * n + ii];
  }
}

void ridge_solve_columns(const double* cols, std::size_t p, std::size_t ell,
                         const double* x, const double* v, double ratio,
                         double* gram, double* out) {
  const auto& k = kernels::ops();
  for (std::size_t t1 = 0; t1 < ell; ++t1) {
    for (std::size_t t2 = 0; t2 <= t1; ++t2) {
      const double g = k.dot(cols + t1 * p, cols + t2 * p, p);
      gram[t1 * ell + t2] = g;
      gram[t2 * ell + t1] = g;
    }
    gram[t1 * ell + t1] += ratio;
    out[t1] = k.dot(cols + t1 * p, x, p) + ratio * v[t1];
  }
  cholesky_solve_inplace(gram, out, ell);
}

}  // namespace detail

std::vector<double> ridge_block_solve(const Matrix& h,
                                      std::span<const double> x,
                                      std::span<const double> v, double ratio) {
  if (!(ratio > 0.0))
    throw std::domain_error("ridge_block_solve: ratio must be positive");
  if (h.rows() != x.size() || h.cols() != v.size())
    throw std::invalid_argument("ridge_block_solve: shape mismatch");
  const std::size_t p = h.rows(), ell = h.cols();
  std::vector<double> cols(p * ell);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t t = 0; t < ell; ++t) cols[t * p + r] = h(r, t);
  std::vector<double> gram(ell * ell), out(ell);
  detail::ridge_solve_columns(cols.data(), p, ell, x.data(), v.data(), ratio,
                              gram.data(), out.data());
  return out;
}

}  // namespace bmtc
