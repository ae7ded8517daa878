#include "bmtc/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bmtc/kernels.hpp"
#include "bmtc/linalg.hpp"
#include "bmtc/rng.hpp"

namespace bmtc {

namespace {

constexpr SliceKind kFactorSlices[3] = {SliceKind::lateral, SliceKind::frontal,
                                        SliceKind::horizontal};

const Tensor3* factor_ptr(const BmFactors& f, int i) {
  return i == 0 ? &f.a1 : (i == 1 ? &f.a2 : &f.a3);
}

// Overwrites the observed entries of x with the mask values; returns the
// squared Frobenius distance between the two versions, which is the fit
// residual when x arrived as bmp(A1,A2,A3).
double impose_observed(Tensor3& x, const ObservationMask& mask) {
  const auto flags = mask.flags();
  const auto vals = mask.values();
  double* p = x.data();
  double acc = 0.0;
  std::size_t c = 0;
  for (std::size_t idx = 0; idx < flags.size(); ++idx) {
    if (!flags[idx]) continue;
    const double d = vals[c] - p[idx];
    acc += d * d;
    p[idx] = vals[c];
    ++c;
  }
  return acc;
}

double frobenius_distance(const Tensor3& a, const Tensor3& b) {
  const double* pa = a.data();
  const double* pb = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Blockwise middle-factor update in whatever frame the caller set up:
// argmin over mid of (lambda/2)*||bmp(pa,mid,pb) - x||_F^2
//                  + (mu/2)*||mid - v||_F^2, with ratio = mu/lambda.
// Every (i,j) tube of mid is an independent ell-variable ridge system.
void mid_update(const Tensor3& pa, const Tensor3& pb, const Tensor3& x,
                const Tensor3& v, double ratio, int threads, Tensor3& mid) {
  const BlockDiagLS blocks = mat_blocks(pa, pb);
  const std::size_t m = blocks.m(), n = blocks.n();
  const std::size_t p = blocks.block_rows(), ell = blocks.block_cols();
  if (!(x.dims() == Dims{m, n, p}) || !(mid.dims() == Dims{m, n, ell}) ||
      !v.same_dims(mid)) {
    throw std::invalid_argument("rals_sweep: nonconformable frame operands");
  }

#pragma omp parallel num_threads(threads)
  {
    std::vector<double> cols(p * ell);
    std::vector<double> gram(ell * ell);
#pragma omp for schedule(static)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(m * n); ++b) {
      const std::size_t i = static_cast<std::size_t>(b) / n;
      const std::size_t j = static_cast<std::size_t>(b) % n;
      blocks.fill_block_columns(i, j, cols.data());
      detail::ridge_solve_columns(cols.data(), p, ell, x.tube(i, j).data(),
                                  v.tube(i, j).data(), ratio, gram.data(),
                                  mid.tube(i, j).data());
    }
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (!std::isfinite(lambda) || lambda <= 0.0)
    throw std::invalid_argument("SolverConfig: lambda must be positive");
  if (!std::isfinite(mu0) || mu0 <= 0.0)
    throw std::invalid_argument("SolverConfig: mu0 must be positive");
  if (!std::isfinite(rho) || rho <= 1.0)
    throw std::invalid_argument("SolverConfig: rho must exceed 1");
  if (!std::isfinite(mu_max) || mu_max <= 0.0 || mu0 > mu_max)
    throw std::invalid_argument("SolverConfig: need 0 < mu0 <= mu_max");
  double alpha_sum = 0.0;
  for (double a : alphas) {
    if (!std::isfinite(a) || a < 0.0)
      throw std::invalid_argument("SolverConfig: alphas must be nonnegative");
    alpha_sum += a;
  }
  if (alpha_sum <= 0.0)
    throw std::invalid_argument("SolverConfig: alphas must sum to a positive value");
  if (bm_rank == 0)
    throw std::invalid_argument("SolverConfig: bm_rank must be at least 1");
  if (max_iters == 0)
    throw std::invalid_argument("SolverConfig: max_iters must be positive");
  if (!(tol >= 0.0))
    throw std::invalid_argument("SolverConfig: tol must be nonnegative");
  if (rals_sweeps == 0)
    throw std::invalid_argument("SolverConfig: rals_sweeps must be positive");
  if (threads < 1)
    throw std::invalid_argument("SolverConfig: threads must be at least 1");
}

const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iters: return "max_iters";
    case SolverStatus::diverged: return "diverged";
  }
  return "unknown";
}

SolverState init_state(const ObservationMask& mask, const SolverConfig& cfg) {
  cfg.validate();
  const Dims d = mask.dims();
  if (d.count() == 0)
    throw std::invalid_argument("init_state: mask dims must be nonzero");

  Tensor3 a1(d.n1, cfg.bm_rank, d.n3);
  Tensor3 a2(d.n1, d.n2, cfg.bm_rank);
  Tensor3 a3(cfg.bm_rank, d.n2, d.n3);
  Rng rng(cfg.seed);
  for (Tensor3* t : {&a1, &a2, &a3}) {
    double* p = t->data();
    for (std::size_t i = 0; i < t->size(); ++i) p[i] = rng.uniform01();
  }

  BmFactors f(std::move(a1), std::move(a2), std::move(a3));
  std::array<Tensor3, 3> h{f.a1, f.a2, f.a3};
  std::array<Tensor3, 3> y{Tensor3(f.a1.dims()), Tensor3(f.a2.dims()),
                           Tensor3(f.a3.dims())};
  Tensor3 x = bmp(f, cfg.threads);
  impose_observed(x, mask);

  return SolverState{std::move(x), std::move(f), std::move(h), std::move(y),
                     cfg.mu0, 0};
}

void update_h(SolverState& state, const SolverConfig& cfg) {
  if (!(state.mu > 0.0))
    throw std::domain_error("update_h: mu must be positive");
  const double mu = state.mu;
  const std::size_t ell = state.factors.bm_rank();

  // SVT inputs D_i = A_i - Y_i/mu.
  std::array<Tensor3, 3> d;
  for (int i = 0; i < 3; ++i) {
    const Tensor3& a = *factor_ptr(state.factors, i);
    d[i] = Tensor3(a.dims());
    const double* ap = a.data();
    const double* yp = state.y[i].data();
    double* dp = d[i].data();
    for (std::size_t idx = 0; idx < a.size(); ++idx)
      dp[idx] = ap[idx] - yp[idx] / mu;
  }

  // alpha_i = 0 makes the threshold zero and the slice update the identity.
  std::vector<std::pair<int, std::size_t>> tasks;
  for (int i = 0; i < 3; ++i) {
    if (cfg.alphas[i] == 0.0) {
      state.h[i] = d[i];
      continue;
    }
    for (std::size_t t = 0; t < ell; ++t) tasks.emplace_back(i, t);
  }

#pragma omp parallel for num_threads(cfg.threads) schedule(dynamic)
  for (std::int64_t w = 0; w < static_cast<std::int64_t>(tasks.size()); ++w) {
    const auto [i, t] = tasks[static_cast<std::size_t>(w)];
    const Matrix slice = SliceRef(d[i], kFactorSlices[i], t).to_matrix();
    set_slice(state.h[i], kFactorSlices[i], t, svt(slice, cfg.alphas[i] / mu));
  }
}

void rals_sweep(SolverState& state, const SolverConfig& cfg) {
  if (!(cfg.lambda > 0.0))
    throw std::domain_error("rals_sweep: lambda must be positive");
  if (!(state.mu > 0.0))
    throw std::domain_error("rals_sweep: mu must be positive");
  const double ratio = state.mu / cfg.lambda;

  // Proximal anchors V_i = H_i + Y_i/mu, fixed for the whole call.
  std::array<Tensor3, 3> v;
  for (int i = 0; i < 3; ++i) {
    v[i] = Tensor3(state.h[i].dims());
    const double* hp = state.h[i].data();
    const double* yp = state.y[i].data();
    double* vp = v[i].data();
    for (std::size_t idx = 0; idx < v[i].size(); ++idx)
      vp[idx] = hp[idx] + yp[idx] / state.mu;
  }

  for (std::size_t sweep = 0; sweep < cfg.rals_sweeps; ++sweep) {
    // A2 in the natural frame.
    mid_update(state.factors.a1, state.factors.a3, state.x, v[1], ratio,
               cfg.threads, state.factors.a2);

    // A3 as the middle of bmp(A2^T, A3^T, A1^T) = bmp(A1,A2,A3)^T; solving
    // against X^T in that frame is the same objective, then two more
    // transposes restore the orientation.
    {
      const Tensor3 a2t = transpose_cycle(state.factors.a2);
      const Tensor3 a1t = transpose_cycle(state.factors.a1);
      const Tensor3 xt = transpose_cycle(state.x);
      const Tensor3 v3t = transpose_cycle(v[2]);
      Tensor3 a3t = transpose_cycle(state.factors.a3);
      mid_update(a2t, a1t, xt, v3t, ratio, cfg.threads, a3t);
      state.factors.a3 = transpose_cycle(transpose_cycle(a3t));
    }

    // A1 as the middle of the twice-transposed frame; one more transpose
    // restores it.
    {
      const Tensor3 a3tt =
          transpose_cycle(transpose_cycle(state.factors.a3));
      const Tensor3 a2tt =
          transpose_cycle(transpose_cycle(state.factors.a2));
      const Tensor3 xtt = transpose_cycle(transpose_cycle(state.x));
      const Tensor3 v1tt = transpose_cycle(transpose_cycle(v[0]));
      Tensor3 a1tt = transpose_cycle(transpose_cycle(state.factors.a1));
      mid_update(a3tt, a2tt, xtt, v1tt, ratio, cfg.threads, a1tt);
      state.factors.a1 = transpose_cycle(a1tt);
    }
  }
}

void update_x(SolverState& state, const ObservationMask& mask, int threads) {
  Tensor3 full = bmp(state.factors, threads);
  if (!(full.dims() == mask.dims()))
    throw std::invalid_argument("update_x: factor product dims do not match the mask");
  impose_observed(full, mask);
  state.x = std::move(full);
}

void update_duals_and_mu(SolverState& state, const SolverConfig& cfg) {
  const auto& ks = kernels::ops();
  for (int i = 0; i < 3; ++i) {
    const Tensor3& a = *factor_ptr(state.factors, i);
    ks.acc_scaled_diff(state.y[i].data(), state.h[i].data(), a.data(),
                       state.mu, a.size());
  }
  state.mu = std::min(cfg.rho * state.mu, cfg.mu_max);
}

double objective_value(const SolverState& state, const SolverConfig& cfg) {
  const std::size_t ell = state.factors.bm_rank();
  double value = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (cfg.alphas[i] == 0.0) continue;
    double slicewise = 0.0;
    for (std::size_t t = 0; t < ell; ++t) {
      const Matrix slice =
          SliceRef(*factor_ptr(state.factors, i), kFactorSlices[i], t)
              .to_matrix();
      slicewise += nuclear_norm(slice);
    }
    value += cfg.alphas[i] * slicewise;
  }
  const Tensor3 full = bmp(state.factors, cfg.threads);
  const double fit = frobenius_distance(state.x, full);
  return value + 0.5 * cfg.lambda * fit * fit;
}

RunResult run(const ObservationMask& mask, const SolverConfig& cfg,
              const Tensor3* ground_truth) {
  cfg.validate();
  for (double val : mask.values()) {
    if (!std::isfinite(val))
      throw std::domain_error("run: observed values must be finite");
  }
  if (ground_truth) {
    if (!(ground_truth->dims() == mask.dims()))
      throw std::invalid_argument("run: ground truth dims do not match the mask");
    if (!ground_truth->all_finite())
      throw std::domain_error("run: ground truth must be finite");
    if (!(frobenius_norm(*ground_truth) > 0.0))
      throw std::invalid_argument("run: ground truth must be nonzero");
  }

  const auto t_start = std::chrono::steady_clock::now();
  SolverState st = init_state(mask, cfg);

  SolverReport report;
  report.records.reserve(cfg.max_iters);

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const double mu_used = st.mu;

    update_h(st, cfg);
    rals_sweep(st, cfg);

    const Tensor3 x_prev = std::move(st.x);
    st.x = bmp(st.factors, cfg.threads);
    const double fit = 0.5 * cfg.lambda * impose_observed(st.x, mask);

    update_duals_and_mu(st, cfg);
    st.iter = it;

    const double rel_change = frobenius_distance(st.x, x_prev) /
                              std::max(frobenius_norm(x_prev), 1e-12);
    const double re = ground_truth
                          ? relative_error(st.x, *ground_truth)
                          : std::numeric_limits<double>::quiet_NaN();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    report.records.push_back({it, re, rel_change, fit, mu_used, secs});

    if (!std::isfinite(fit) || !st.x.all_finite()) {
      report.status = SolverStatus::diverged;
      break;
    }
    if ((ground_truth ? re : rel_change) < cfg.tol) {
      report.status = SolverStatus::converged;
      break;
    }
  }

  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return RunResult{std::move(st.x), std::move(st.factors), std::move(report)};
}

}  // namespace bmtc
