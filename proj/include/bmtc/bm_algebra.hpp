#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bmtc/matrix.hpp"
#include "bmtc/tensor.hpp"

namespace bmtc {

// Conformable factor triplet of a BM-rank-l decomposition of an
// (n1,n2,n3) tensor:
//   a1 has dims (n1, l, n3), a2 has dims (n1, n2, l), a3 has dims (l, n2, n3).
struct BmFactors {
  Tensor3 a1, a2, a3;

  BmFactors(Tensor3 a1_, Tensor3 a2_, Tensor3 a3_);

  std::size_t bm_rank() const { return a1.n2(); }
  Dims product_dims() const { return {a1.n1(), a2.n2(), a3.n3()}; }
};

// BM-product: out(i,j,k) = sum_t a1(i,t,k) * a2(i,j,t) * a3(t,j,k).
// The (i,j) tubes are independent and are distributed across `threads`
// workers; the arithmetic per tube is identical for any thread count.
Tensor3 bmp(const BmFactors& f, int threads = 1);
Tensor3 bmp(const Tensor3& a1, const Tensor3& a2, const Tensor3& a3,
            int threads = 1);

// Rank-one BM outer product of a lateral, a frontal and a horizontal slice:
// out(i,j,k) = lateral(i,k) * frontal(i,j) * horizontal(j,k).
Tensor3 bm_outer(const SliceRef& lateral, const SliceRef& frontal,
                 const SliceRef& horizontal);

// The block operator pairing a (m,l,p) with b (l,n,p): block (i,j) is the
// p-by-l matrix with entries block[k,t] = a(i,t,k) * b(t,j,k). The full
// mnp-by-mnl block-diagonal matrix is never materialized; blocks are
// generated on demand. Holds references: the paired tensors must outlive
// the view.
class BlockDiagLS {
 public:
  BlockDiagLS(const Tensor3& a, const Tensor3& b);

  std::size_t m() const { return a_->n1(); }
  std::size_t n() const { return b_->n2(); }
  std::size_t block_rows() const { return a_->n3(); }  // p
  std::size_t block_cols() const { return a_->n2(); }  // l

  Matrix block(std::size_t i, std::size_t j) const;

  // Column-major block: out must hold block_rows()*block_cols() doubles;
  // column t occupies out[t*p .. t*p+p). Columns are products of two
  // contiguous tubes, which is what the solver's ridge step consumes.
  void fill_block_columns(std::size_t i, std::size_t j, double* out) const;

  // Blockwise application of the block-diagonal map: for every (i,j),
  // out block (length p) = block(i,j) * in block (length l). Input length
  // m*n*l, output length m*n*p.
  std::vector<double> apply(std::span<const double> in) const;

 private:
  const Tensor3* a_;
  const Tensor3* b_;
};

BlockDiagLS mat_blocks(const Tensor3& a, const Tensor3& b);

// Self-test of the transpose identity
// transpose_cycle(bmp(a1,a2,a3)) == bmp(a2^T, a3^T, a1^T)
// within rel_tol relative Frobenius distance.
bool bmp_transpose_identity_check(const BmFactors& f, double rel_tol = 1e-12);

}  // namespace bmtc
