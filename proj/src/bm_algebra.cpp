#include "bmtc/bm_algebra.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "bmtc/kernels.hpp"

namespace bmtc {

BmFactors::BmFactors(Tensor3 a1_, Tensor3 a2_, Tensor3 a3_)
    : a1(std::move(a1_)), a2(std::move(a2_)), a3(std::move(a3_)) {
  const std::size_t m = a1.n1(), l = a1.n2(), p = a1.n3();
  if (a2.n1() != m || a2.n3() != l)
    throw std::invalid_argument("BmFactors: a2 not conformable with a1");
  if (a3.n1() != l || a3.n3() != p)
    throw std::invalid_argument("BmFactors: a3 not conformable with a1");
  if (a2.n2() != a3.n2())
    throw std::invalid_argument("BmFactors: a2 and a3 disagree on n2");
}

Tensor3 bmp(const BmFactors& f, int threads) {
  const std::size_t m = f.a1.n1(), l = f.a1.n2(), p = f.a1.n3();
  const std::size_t n = f.a2.n2();
  Tensor3 out(m, n, p);
  const auto& k = kernels::ops();
  const std::int64_t tubes = static_cast<std::int64_t>(m * n);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::int64_t b = 0; b < tubes; ++b) {
    const std::size_t i = static_cast<std::size_t>(b) / n;
    const std::size_t j = static_cast<std::size_t>(b) % n;
    double* out_tube = out.tube(i, j).data();
    for (std::size_t t = 0; t < l; ++t)
      k.fma3(out_tube, f.a1.tube(i, t).data(), f.a3.tube(t, j).data(),
             f.a2(i, j, t), p);
  }
  return out;
}

Tensor3 bmp(const Tensor3& a1, const Tensor3& a2, const Tensor3& a3,
            int threads) {
  return bmp(BmFactors(a1, a2, a3), threads);
}

Tensor3 bm_outer(const SliceRef& lateral, const SliceRef& frontal,
                 const SliceRef& horizontal) {
  if (lateral.kind() != SliceKind::lateral ||
      frontal.kind() != SliceKind::frontal ||
      horizontal.kind() != SliceKind::horizontal)
    throw std::invalid_argument("bm_outer: slice orientations do not match");
  const std::size_t m = lateral.rows(), p = lateral.cols();
  const std::size_t n = frontal.cols();
  if (frontal.rows() != m || horizontal.rows() != n || horizontal.cols() != p)
    throw std::invalid_argument("bm_outer: slice shapes not conformable");
  Tensor3 out(m, n, p);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double fij = frontal(i, j);
      auto tube = out.tube(i, j);
      for (std::size_t k = 0; k < p; ++k)
        tube[k] = lateral(i, k) * fij * horizontal(j, k);
    }
  return out;
}

BlockDiagLS::BlockDiagLS(const Tensor3& a, const Tensor3& b)
    : a_(&a), b_(&b) {
  if (a.n2() != b.n1() || a.n3() != b.n3())
    throw std::invalid_argument("BlockDiagLS: factor pair not conformable");
}

Matrix BlockDiagLS::block(std::size_t i, std::size_t j) const {
  const std::size_t p = block_rows(), l = block_cols();
  Matrix blk(p, l);
  for (std::size_t t = 0; t < l; ++t) {
    auto at = a_->tube(i, t);
    auto bt = b_->tube(t, j);
    for (std::size_t k = 0; k < p; ++k) blk(k, t) = at[k] * bt[k];
  }
  return blk;
}

void BlockDiagLS::fill_block_columns(std::size_t i, std::size_t j,
                                     double* out) const {
  const std::size_t p = block_rows(), l = block_cols();
  const auto& k = kernels::ops();
  for (std::size_t t = 0; t < l; ++t)
    k.mul(out + t * p, a_->tube(i, t).data(), b_->tube(t, j).data(), p);
}

std::vector<double> BlockDiagLS::apply(std::span<const double> in) const {
  const std::size_t p = block_rows(), l = block_cols();
  if (in.size() != m() * n() * l)
    throw std::invalid_argument("BlockDiagLS::apply: input length mismatch");
  std::vector<double> out(m() * n() * p, 0.0);
  const auto& k = kernels::ops();
  for (std::size_t i = 0; i < m(); ++i)
    for (std::size_t j = 0; j < n(); ++j) {
      const double* in_blk = in.data() + (i * n() + j) * l;
      double* out_blk = out.data() + (i * n() + j) * p;
      for (std::size_t t = 0; t < l; ++t)
        k.fma3(out_blk, a_->tube(i, t).data(), b_->tube(t, j).data(),
               in_blk[t], p);
    }
  return out;
}

BlockDiagLS mat_blocks(const Tensor3& a, const Tensor3& b) {
  return BlockDiagLS(a, b);
}

bool bmp_transpose_identity_check(const BmFactors& f, double rel_tol) {
  const Tensor3 lhs = transpose_cycle(bmp(f));
  const Tensor3 rhs =
      bmp(transpose_cycle(f.a2), transpose_cycle(f.a3), transpose_cycle(f.a1));
  double diff = 0.0;
  for (std::size_t e = 0; e < lhs.size(); ++e) {
    const double d = lhs.data()[e] - rhs.data()[e];
    diff += d * d;
  }
  const double ref = frobenius_norm(lhs);
  if (ref == 0.0) return std::sqrt(diff) <= rel_tol;
  return std::sqrt(diff) <= rel_tol * ref;
}

}  // namespace bmtc
