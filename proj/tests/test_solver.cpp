#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "bmtc/bm_algebra.hpp"
#include "bmtc/io.hpp"
#include "bmtc/linalg.hpp"
#include "bmtc/rng.hpp"
#include "bmtc/solver.hpp"
#include "bmtc/tensor.hpp"
#include "doctest.h"

namespace {

using namespace bmtc;

Tensor3 random_tensor(std::size_t n1, std::size_t n2, std::size_t n3,
                      Rng& rng) {
  Tensor3 t(n1, n2, n3);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform01();
  return t;
}

ObservationMask random_mask(std::size_t n, double rate, std::uint64_t seed) {
  Rng rng(seed);
  Tensor3 t = random_tensor(n, n, n, rng);
  std::vector<std::uint8_t> flags(t.size());
  for (auto& f : flags) f = rng.uniform01() < rate ? 1 : 0;
  return ObservationMask::from_tensor(t, flags);
}

// Randomizes the auxiliaries and multipliers so sweeps see a generic state.
void scramble(SolverState& st, Rng& rng, double mu) {
  st.mu = mu;
  Tensor3* hs[3] = {&st.h[0], &st.h[1], &st.h[2]};
  Tensor3* ys[3] = {&st.y[0], &st.y[1], &st.y[2]};
  for (int i = 0; i < 3; ++i) {
    for (std::size_t f = 0; f < hs[i]->size(); ++f)
      hs[i]->data()[f] = rng.uniform01();
    for (std::size_t f = 0; f < ys[i]->size(); ++f)
      ys[i]->data()[f] = 0.5 * rng.uniform01() - 0.25;
  }
}

const Tensor3& factor(const SolverState& st, int i) {
  return i == 0 ? st.factors.a1 : i == 1 ? st.factors.a2 : st.factors.a3;
}

Tensor3 anchor(const SolverState& st, int i) {
  Tensor3 v = st.h[i];
  for (std::size_t f = 0; f < v.size(); ++f)
    v.data()[f] += st.y[i].data()[f] / st.mu;
  return v;
}

// lambda/2 ||X - bmp||^2 + mu/2 ||A_i - V_i||^2 with the other two factors
// pinned; the per-factor objective each RALS solve minimizes.
double factor_objective(const Tensor3& x, const BmFactors& f, int i,
                        const Tensor3& v, double mu, double lambda) {
  Tensor3 prod = bmp(f);
  double fit = 0.0;
  for (std::size_t e = 0; e < x.size(); ++e) {
    double d = x.data()[e] - prod.data()[e];
    fit += d * d;
  }
  const Tensor3& a = i == 0 ? f.a1 : i == 1 ? f.a2 : f.a3;
  double reg = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    double d = a.data()[e] - v.data()[e];
    reg += d * d;
  }
  return 0.5 * lambda * fit + 0.5 * mu * reg;
}

std::vector<double> gauss_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c)
        std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * b[c];
    b[ri] = s / a[ri * n + ri];
  }
  return b;
}

Matrix bdiag_of(const Tensor3& t, SliceKind kind, std::size_t ell) {
  SliceRef first(t, kind, 0);
  std::size_t r = first.rows(), c = first.cols();
  Matrix big(ell * r, ell * c);
  for (std::size_t b = 0; b < ell; ++b) {
    SliceRef s(t, kind, b);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) big(b * r + i, b * c + j) = s(i, j);
  }
  return big;
}

const SliceKind kFactorSlices[3] = {SliceKind::lateral, SliceKind::frontal,
                                    SliceKind::horizontal};

}  // namespace

TEST_CASE("solver: config validation rejects each broken invariant") {
  SolverConfig good;
  CHECK_NOTHROW(good.validate());

  auto expect_throw = [](auto mutate) {
    SolverConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  expect_throw([](SolverConfig& c) { c.lambda = 0.0; });
  expect_throw([](SolverConfig& c) { c.lambda = -1.0; });
  expect_throw([](SolverConfig& c) { c.mu0 = 0.0; });
  expect_throw([](SolverConfig& c) { c.rho = 1.0; });
  expect_throw([](SolverConfig& c) { c.rho = 0.99; });
  expect_throw([](SolverConfig& c) { c.mu_max = 1e-9; });  // mu0 > mu_max
  expect_throw([](SolverConfig& c) { c.alphas = {0.0, 0.0, 0.0}; });
  expect_throw([](SolverConfig& c) { c.alphas = {-0.1, 0.6, 0.5}; });
  expect_throw([](SolverConfig& c) { c.bm_rank = 0; });
  expect_throw([](SolverConfig& c) { c.max_iters = 0; });
  expect_throw([](SolverConfig& c) { c.tol = -1e-9; });
  expect_throw([](SolverConfig& c) { c.tol = std::nan(""); });
  expect_throw([](SolverConfig& c) { c.rals_sweeps = 0; });
  expect_throw([](SolverConfig& c) { c.threads = 0; });
}

TEST_CASE("solver: init_state layout, seeding and X assembly") {
  ObservationMask mask = random_mask(10, 0.4, 101);
  SolverConfig cfg;
  cfg.bm_rank = 3;
  cfg.seed = 42;

  SolverState a = init_state(mask, cfg);
  SolverState b = init_state(mask, cfg);

  CHECK(a.factors.a1.dims() == Dims{10, 3, 10});
  CHECK(a.factors.a2.dims() == Dims{10, 10, 3});
  CHECK(a.factors.a3.dims() == Dims{3, 10, 10});
  CHECK(a.mu == cfg.mu0);
  CHECK(a.iter == 0);

  // determinism, bitwise
  CHECK(std::memcmp(a.factors.a1.data(), b.factors.a1.data(),
                    a.factors.a1.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.x.data(), b.x.data(), a.x.size() * sizeof(double)) == 0);

  // H mirrors A, Y is zero
  for (int i = 0; i < 3; ++i) {
    const Tensor3& f = factor(a, i);
    CHECK(std::memcmp(a.h[i].data(), f.data(), f.size() * sizeof(double)) == 0);
    for (std::size_t e = 0; e < a.y[i].size(); ++e)
      CHECK(a.y[i].data()[e] == 0.0);
  }

  for (std::size_t e = 0; e < a.factors.a1.size(); ++e) {
    CHECK(a.factors.a1.data()[e] >= 0.0);
    CHECK(a.factors.a1.data()[e] < 1.0);
  }

  // different seeds decorrelate
  cfg.seed = 43;
  SolverState c = init_state(mask, cfg);
  CHECK(std::memcmp(a.factors.a1.data(), c.factors.a1.data(),
                    a.factors.a1.size() * sizeof(double)) != 0);

  // X carries observations on the mask and the factor product elsewhere
  Tensor3 prod = bmp(a.factors);
  Tensor3 obs = mask.to_tensor(0.0);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j)
      for (std::size_t k = 0; k < 10; ++k) {
        if (mask.observed(i, j, k))
          CHECK(a.x(i, j, k) == obs(i, j, k));
        else
          CHECK(a.x(i, j, k) == prod(i, j, k));
      }
}

TEST_CASE("solver: init_state with empty mask returns the pure product") {
  Rng rng(7);
  Tensor3 t = random_tensor(6, 5, 4, rng);
  std::vector<std::uint8_t> flags(t.size(), 0);
  ObservationMask mask = ObservationMask::from_tensor(t, flags);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  SolverState st = init_state(mask, cfg);
  Tensor3 prod = bmp(st.factors);
  CHECK(std::memcmp(st.x.data(), prod.data(), prod.size() * sizeof(double)) ==
        0);
}

TEST_CASE("solver: update_h with a zero alpha is the exact shifted factor") {
  ObservationMask mask = random_mask(6, 0.5, 103);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.alphas = {0.0, 0.0, 0.5};
  SolverState st = init_state(mask, cfg);
  Rng rng(11);
  scramble(st, rng, 0.37);

  SolverState pre = st;
  update_h(st, cfg);
  for (int i = 0; i < 2; ++i) {  // the zero-threshold components
    const Tensor3& a = factor(pre, i);
    for (std::size_t e = 0; e < a.size(); ++e) {
      double want = a.data()[e] - pre.y[i].data()[e] / pre.mu;
      CHECK(st.h[i].data()[e] == want);
    }
  }
  // the positive-threshold component must have moved
  double moved = 0.0;
  for (std::size_t e = 0; e < st.h[2].size(); ++e) {
    double want = factor(pre, 2).data()[e] - pre.y[2].data()[e] / pre.mu;
    moved = std::max(moved, std::abs(st.h[2].data()[e] - want));
  }
  CHECK(moved > 0.0);
}

TEST_CASE("solver: update_h equals SVT of the assembled block diagonal") {
  ObservationMask mask = random_mask(5, 0.5, 104);
  for (std::size_t ell : {1ul, 2ul, 3ul}) {
    SolverConfig cfg;
    cfg.bm_rank = ell;
    SolverState st = init_state(mask, cfg);
    Rng rng(13 + ell);
    scramble(st, rng, 0.8);

    SolverState pre = st;
    update_h(st, cfg);

    for (int i = 0; i < 3; ++i) {
      Tensor3 d = factor(pre, i);
      for (std::size_t e = 0; e < d.size(); ++e)
        d.data()[e] -= pre.y[i].data()[e] / pre.mu;
      Matrix big = bdiag_of(d, kFactorSlices[i], ell);
      Matrix shrunk = svt(big, cfg.alphas[i] / pre.mu);
      Matrix got = bdiag_of(st.h[i], kFactorSlices[i], ell);
      REQUIRE(got.rows() == shrunk.rows());
      double md = 0.0;
      for (std::size_t e = 0; e < got.size(); ++e)
        md = std::max(md, std::abs(got.data()[e] - shrunk.data()[e]));
      CHECK(md <= 1e-12);
    }
  }
}

TEST_CASE("solver: update_h approaches the identity as mu grows") {
  ObservationMask mask = random_mask(6, 0.5, 105);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  SolverState st = init_state(mask, cfg);
  Rng rng(17);
  scramble(st, rng, 1e12);

  SolverState pre = st;
  update_h(st, cfg);
  for (int i = 0; i < 3; ++i) {
    const Tensor3& a = factor(pre, i);
    double dist = 0.0;
    for (std::size_t e = 0; e < a.size(); ++e) {
      double want = a.data()[e] - pre.y[i].data()[e] / pre.mu;
      dist = std::max(dist, std::abs(st.h[i].data()[e] - want));
    }
    CHECK(dist <= cfg.alphas[i] * 6.0 * 2.0 * (1.0 / 1e12) * 10.0);
  }
}

TEST_CASE("solver: update_h slice results are proximally optimal") {
  ObservationMask mask = random_mask(3, 0.6, 106);
  SolverConfig cfg;
  cfg.bm_rank = 3;  // all slices 3x3
  SolverState st = init_state(mask, cfg);
  Rng rng(19);
  scramble(st, rng, 0.5);

  SolverState pre = st;
  update_h(st, cfg);
  for (int i = 0; i < 3; ++i) {
    Tensor3 d = factor(pre, i);
    for (std::size_t e = 0; e < d.size(); ++e)
      d.data()[e] -= pre.y[i].data()[e] / pre.mu;
    std::size_t count = i == 0 ? d.n2() : i == 1 ? d.n3() : d.n1();
    for (std::size_t t = 0; t < count; ++t) {
      Matrix dm = SliceRef(d, kFactorSlices[i], t).to_matrix();
      Matrix hm = SliceRef(st.h[i], kFactorSlices[i], t).to_matrix();
      auto fval = [&](const Matrix& m) {
        double quad = 0.0;
        for (std::size_t e = 0; e < m.size(); ++e) {
          double diff = m.data()[e] - dm.data()[e];
          quad += diff * diff;
        }
        return cfg.alphas[i] * nuclear_norm(m) + 0.5 * pre.mu * quad;
      };
      double best = fval(hm);
      for (int p = 0; p < 50; ++p) {
        Matrix q = hm;
        double eps = p % 2 == 0 ? 1e-3 : 0.2;
        for (std::size_t e = 0; e < q.size(); ++e)
          q.data()[e] += eps * (2.0 * rng.uniform01() - 1.0);
        CHECK(fval(q) >= best - 1e-10);
      }
    }
  }
}

TEST_CASE("solver: update_h rejects a nonpositive penalty") {
  ObservationMask mask = random_mask(4, 0.5, 107);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  SolverState st = init_state(mask, cfg);
  st.mu = 0.0;
  CHECK_THROWS_AS(update_h(st, cfg), std::domain_error);
}

TEST_CASE("solver: rals_sweep keeps a consistent state fixed") {
  ObservationMask mask = random_mask(6, 0.5, 108);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  SolverState st = init_state(mask, cfg);
  // X = bmp(A), H = A, Y = 0: every block solve has its own solution as input
  st.x = bmp(st.factors);
  for (int i = 0; i < 3; ++i) st.h[i] = factor(st, i);
  st.mu = 0.9;

  SolverState pre = st;
  rals_sweep(st, cfg);
  for (int i = 0; i < 3; ++i) {
    const Tensor3& before = factor(pre, i);
    const Tensor3& after = factor(st, i);
    double md = 0.0;
    for (std::size_t e = 0; e < before.size(); ++e)
      md = std::max(md, std::abs(before.data()[e] - after.data()[e]));
    CHECK(md <= 1e-12);
  }
}

TEST_CASE("solver: rals_sweep approaches the anchors as mu/lambda grows") {
  ObservationMask mask = random_mask(5, 0.5, 109);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.lambda = 1e-2;
  SolverState st = init_state(mask, cfg);
  Rng rng(23);
  scramble(st, rng, 1e14);

  Tensor3 want[3] = {anchor(st, 0), anchor(st, 1), anchor(st, 2)};
  rals_sweep(st, cfg);
  for (int i = 0; i < 3; ++i) {
    double md = 0.0;
    for (std::size_t e = 0; e < want[i].size(); ++e)
      md = std::max(md, std::abs(factor(st, i).data()[e] - want[i].data()[e]));
    CHECK(md <= 1e-10);
  }
}

TEST_CASE("solver: rals_sweep decreases each per-factor objective") {
  for (std::uint64_t seed : {201ull, 202ull, 203ull}) {
    ObservationMask mask = random_mask(5, 0.6, seed);
    SolverConfig cfg;
    cfg.bm_rank = 3;
    SolverState st = init_state(mask, cfg);
    Rng rng(seed);
    scramble(st, rng, 0.4);

    SolverState pre = st;
    rals_sweep(st, cfg);

    // A2 solved against the old A1, A3
    BmFactors f_old = pre.factors;
    BmFactors f_new_a2(pre.factors.a1, st.factors.a2, pre.factors.a3);
    double before = factor_objective(pre.x, f_old, 1, anchor(pre, 1), pre.mu,
                                     cfg.lambda);
    double after = factor_objective(pre.x, f_new_a2, 1, anchor(pre, 1), pre.mu,
                                    cfg.lambda);
    CHECK(after <= before + 1e-10);

    // A3 solved against the new A2, old A1
    BmFactors f_pre_a3(pre.factors.a1, st.factors.a2, pre.factors.a3);
    BmFactors f_new_a3(pre.factors.a1, st.factors.a2, st.factors.a3);
    before = factor_objective(pre.x, f_pre_a3, 2, anchor(pre, 2), pre.mu,
                              cfg.lambda);
    after = factor_objective(pre.x, f_new_a3, 2, anchor(pre, 2), pre.mu,
                             cfg.lambda);
    CHECK(after <= before + 1e-10);

    // A1 solved against the new A2, A3
    BmFactors f_pre_a1(pre.factors.a1, st.factors.a2, st.factors.a3);
    double before1 = factor_objective(pre.x, f_pre_a1, 0, anchor(pre, 0),
                                      pre.mu, cfg.lambda);
    double after1 = factor_objective(pre.x, st.factors, 0, anchor(pre, 0),
                                     pre.mu, cfg.lambda);
    CHECK(after1 <= before1 + 1e-10);
  }
}

TEST_CASE("solver: one A2 update equals the monolithic stacked solve") {
  for (std::uint64_t seed : {301ull, 302ull}) {
    const std::size_t n = 4, ell = 2;
    ObservationMask mask = random_mask(n, 0.5, seed);
    SolverConfig cfg;
    cfg.bm_rank = ell;
    SolverState st = init_state(mask, cfg);
    Rng rng(seed + 7);
    scramble(st, rng, 0.6);

    SolverState pre = st;
    rals_sweep(st, cfg);

    // assemble the full system matrix: rows tvec(X), cols tvec(A2)
    const std::size_t rows = n * n * n, cols = n * n * ell;
    std::vector<double> m(rows * cols, 0.0);
    BlockDiagLS sys = mat_blocks(pre.factors.a1, pre.factors.a3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Matrix blk = sys.block(i, j);
        for (std::size_t k = 0; k < n; ++k)
          for (std::size_t t = 0; t < ell; ++t)
            m[((i * n + j) * n + k) * cols + (i * n + j) * ell + t] =
                blk(k, t);
      }

    std::vector<double> x = tvec(pre.x), v = tvec(anchor(pre, 1));
    double ratio = pre.mu / cfg.lambda;
    std::vector<double> lhs(cols * cols, 0.0), rhs(cols, 0.0);
    for (std::size_t a = 0; a < cols; ++a) {
      for (std::size_t b = 0; b < cols; ++b) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r)
          s += m[r * cols + a] * m[r * cols + b];
        lhs[a * cols + b] = s + (a == b ? ratio : 0.0);
      }
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += m[r * cols + a] * x[r];
      rhs[a] = s + ratio * v[a];
    }
    std::vector<double> mono = gauss_solve(lhs, rhs);

    std::vector<double> got = tvec(st.factors.a2);
    double md = 0.0;
    for (std::size_t e = 0; e < cols; ++e)
      md = std::max(md, std::abs(got[e] - mono[e]));
    CHECK(md <= 1e-9);
  }
}

TEST_CASE("solver: rals_sweep rejects a nonpositive penalty") {
  ObservationMask mask = random_mask(4, 0.5, 111);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  SolverState st = init_state(mask, cfg);
  st.mu = -1.0;
  CHECK_THROWS_AS(rals_sweep(st, cfg), std::domain_error);
}

TEST_CASE("solver: update_x imposes observations over the product") {
  ObservationMask mask = random_mask(6, 0.3, 112);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  SolverState st = init_state(mask, cfg);
  Rng rng(29);
  for (std::size_t e = 0; e < st.factors.a2.size(); ++e)
    st.factors.a2.data()[e] = rng.uniform01();

  Tensor3 prod = bmp(st.factors);
  Tensor3 obs = mask.to_tensor(0.0);
  update_x(st, mask);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t k = 0; k < 6; ++k) {
        double want =
            mask.observed(i, j, k) ? obs(i, j, k) : prod(i, j, k);
        CHECK(st.x(i, j, k) == want);
      }

  SolverState st2 = st;
  update_x(st2, mask, 4);
  CHECK(std::memcmp(st.x.data(), st2.x.data(), st.x.size() * sizeof(double)) ==
        0);
}

TEST_CASE("solver: dual update follows the exact formulas and caps mu") {
  ObservationMask mask = random_mask(5, 0.5, 113);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.rho = 2.0;
  cfg.mu_max = 1.5;
  SolverState st = init_state(mask, cfg);
  Rng rng(31);
  scramble(st, rng, 1.0);

  SolverState pre = st;
  update_duals_and_mu(st, cfg);
  for (int i = 0; i < 3; ++i)
    for (std::size_t e = 0; e < st.y[i].size(); ++e) {
      double want = pre.y[i].data()[e] +
                    pre.mu * (pre.h[i].data()[e] - factor(pre, i).data()[e]);
      CHECK(std::abs(st.y[i].data()[e] - want) <= 1e-13);
    }
  CHECK(st.mu == 1.5);  // min(2.0 * 1.0, cap)

  update_duals_and_mu(st, cfg);
  CHECK(st.mu == 1.5);  // pinned at the cap

  // H = A leaves the multipliers alone
  SolverState fix = init_state(mask, cfg);
  SolverState fix_pre = fix;
  update_duals_and_mu(fix, cfg);
  for (int i = 0; i < 3; ++i)
    CHECK(std::memcmp(fix.y[i].data(), fix_pre.y[i].data(),
                      fix.y[i].size() * sizeof(double)) == 0);
}

TEST_CASE("solver: objective_value matches an assembled recomputation") {
  ObservationMask mask = random_mask(5, 0.5, 114);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.alphas = {0.5, 0.3, 0.2};
  SolverState st = init_state(mask, cfg);
  Rng rng(37);
  for (std::size_t e = 0; e < st.x.size(); ++e)
    st.x.data()[e] += 0.1 * rng.uniform01();

  double got = objective_value(st, cfg);

  double want = 0.0;
  for (int i = 0; i < 3; ++i)
    want += cfg.alphas[i] *
            nuclear_norm(bdiag_of(factor(st, i), kFactorSlices[i], 2));
  Tensor3 prod = bmp(st.factors);
  double fit = 0.0;
  for (std::size_t e = 0; e < st.x.size(); ++e) {
    double d = st.x.data()[e] - prod.data()[e];
    fit += d * d;
  }
  want += 0.5 * cfg.lambda * fit;
  CHECK(got == doctest::Approx(want).epsilon(1e-12));

  // zero factors and iterate: value collapses to zero
  SolverState zero = st;
  zero.x = Tensor3(5, 5, 5);
  zero.factors = BmFactors(Tensor3(5, 2, 5), Tensor3(5, 5, 2), Tensor3(2, 5, 5));
  CHECK(objective_value(zero, cfg) == 0.0);

  // alphas zero: pure fit term
  SolverConfig fit_only = cfg;
  fit_only.alphas = {0.0, 0.0, 1e-300};
  double just_fit = objective_value(st, fit_only);
  CHECK(just_fit == doctest::Approx(0.5 * cfg.lambda * fit).epsilon(1e-12));
}

TEST_CASE("solver: run honors the iteration cap and reports it") {
  ObservationMask mask = random_mask(6, 0.5, 115);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.max_iters = 5;
  cfg.tol = 0.0;
  RunResult res = run(mask, cfg);
  CHECK(res.report.records.size() == 5);
  CHECK(res.report.status == SolverStatus::max_iters);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(res.report.records[k].iter == k + 1);
    CHECK(std::isnan(res.report.records[k].re));
    CHECK(res.report.records[k].mu ==
          doctest::Approx(cfg.mu0 * std::pow(cfg.rho, double(k)))
              .epsilon(1e-12));
  }
  // mu never decreases and never passes the cap
  for (std::size_t k = 1; k < 5; ++k) {
    CHECK(res.report.records[k].mu >= res.report.records[k - 1].mu);
    CHECK(res.report.records[k].mu <= cfg.mu_max);
  }
  // final iterate keeps the observations
  Tensor3 obs = mask.to_tensor(0.0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t k = 0; k < 6; ++k)
        if (mask.observed(i, j, k)) CHECK(res.x(i, j, k) == obs(i, j, k));
}

TEST_CASE("solver: run stop rules for both tolerance flavors") {
  ObservationMask mask = random_mask(6, 0.5, 116);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.max_iters = 50;
  cfg.tol = 1e9;

  // with ground truth the RE rule fires immediately
  Tensor3 gt = mask.to_tensor(0.5);
  RunResult with_gt = run(mask, cfg, &gt);
  CHECK(with_gt.report.status == SolverStatus::converged);
  CHECK(with_gt.report.records.size() == 1);
  CHECK(std::isfinite(with_gt.report.records[0].re));

  // without it the relative-change rule fires
  RunResult without = run(mask, cfg);
  CHECK(without.report.status == SolverStatus::converged);
  CHECK(without.report.records.size() == 1);
  CHECK(std::isnan(without.report.records[0].re));
}

TEST_CASE("solver: run is a pure function of the config across threads") {
  SyntheticInstance inst = gen_synthetic({8, 8, 8}, 2, 2, 71);
  ObservationMask mask = gen_mask({0.5, 71, {8, 8, 8}}, inst.x);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.max_iters = 12;
  cfg.tol = 0.0;
  cfg.seed = 5;

  RunResult base = run(mask, cfg, &inst.x);
  for (int threads : {2, 8}) {
    SolverConfig c2 = cfg;
    c2.threads = threads;
    RunResult res = run(mask, c2, &inst.x);
    REQUIRE(res.report.records.size() == base.report.records.size());
    for (std::size_t k = 0; k < base.report.records.size(); ++k) {
      CHECK(res.report.records[k].re == base.report.records[k].re);
      CHECK(res.report.records[k].rel_change ==
            base.report.records[k].rel_change);
      CHECK(res.report.records[k].fit_term == base.report.records[k].fit_term);
      CHECK(res.report.records[k].mu == base.report.records[k].mu);
    }
    CHECK(std::memcmp(res.x.data(), base.x.data(),
                      base.x.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("solver: run flags blowups as diverged") {
  Rng rng(73);
  Tensor3 t(6, 6, 6);
  for (std::size_t e = 0; e < t.size(); ++e)
    t.data()[e] = 1e200 * (rng.uniform01() + 0.5);
  std::vector<std::uint8_t> flags(t.size());
  for (auto& f : flags) f = rng.uniform01() < 0.5 ? 1 : 0;
  ObservationMask mask = ObservationMask::from_tensor(t, flags);

  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.max_iters = 10;
  cfg.tol = 0.0;
  RunResult res = run(mask, cfg);
  CHECK(res.report.status == SolverStatus::diverged);
  CHECK(res.report.records.size() <= 10);
}

TEST_CASE("solver: run validates ground truth") {
  ObservationMask mask = random_mask(5, 0.5, 117);
  SolverConfig cfg;
  cfg.bm_rank = 2;
  cfg.max_iters = 2;

  Tensor3 wrong_dims(4, 5, 5);
  CHECK_THROWS_AS(run(mask, cfg, &wrong_dims), std::invalid_argument);
  Tensor3 zero(5, 5, 5);
  CHECK_THROWS_AS(run(mask, cfg, &zero), std::invalid_argument);
}

TEST_CASE("solver: status strings") {
  CHECK(to_string(SolverStatus::converged) == std::string("converged"));
  CHECK(to_string(SolverStatus::max_iters) == std::string("max_iters"));
  CHECK(to_string(SolverStatus::diverged) == std::string("diverged"));
}
