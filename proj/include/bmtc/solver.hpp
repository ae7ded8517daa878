#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bmtc/bm_algebra.hpp"
#include "bmtc/tensor.hpp"

namespace bmtc {

// ADMM / RALS hyperparameters for the slicewise nuclear-norm completion
// solver. Defaults are the benchmark protocol values.
struct SolverConfig {
  double lambda = 0.2;     // fit weight
  double mu0 = 0.01;       // initial penalty
  double rho = 1.05;       // penalty growth, must be > 1
  double mu_max = 1e10;    // penalty cap
  std::array<double, 3> alphas{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::size_t bm_rank = 3;
  std::size_t max_iters = 500;
  double tol = 1e-4;       // stopping tolerance (RE with ground truth,
                           // relative iterate change without)
  std::size_t rals_sweeps = 1;  // inner factor passes per outer iteration
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;  // throws on violated invariants
};

enum class SolverStatus { converged, max_iters, diverged };

const char* to_string(SolverStatus s);

struct IterationRecord {
  std::size_t iter = 0;     // 1-based
  double re = 0.0;          // relative error vs ground truth; NaN without one
  double rel_change = 0.0;  // ||X_new - X_old||_F / max(||X_old||_F, 1e-12)
  double fit_term = 0.0;    // (lambda/2) * ||X - bmp(A1,A2,A3)||_F^2
  double mu = 0.0;          // penalty used by this iteration
  double seconds = 0.0;     // wall time of this iteration
};

struct SolverReport {
  std::vector<IterationRecord> records;
  SolverStatus status = SolverStatus::max_iters;
  double total_seconds = 0.0;
};

// Full ADMM state: completion iterate, factors, slicewise auxiliaries H_i
// (same dims as the factors), multipliers Y_i, and the penalty.
struct SolverState {
  Tensor3 x;
  BmFactors factors;
  std::array<Tensor3, 3> h;
  std::array<Tensor3, 3> y;
  double mu = 0.0;
  std::size_t iter = 0;
};

// Seeded initialization: factor entries i.i.d. uniform [0,1) drawn in the
// order a1, a2, a3 (each in storage order); H_i = A_i, Y_i = 0, mu = mu0,
// X = observed values on the mask and bmp(A1,A2,A3) elsewhere.
SolverState init_state(const ObservationMask& mask, const SolverConfig& cfg);

// H_i <- slicewise SVT of A_i - Y_i/mu at threshold alpha_i/mu. The slices
// follow the factor block-diagonal arrangement: lateral slices for A1,
// frontal for A2, horizontal for A3. The 3*l slice problems are independent
// and distributed across cfg.threads workers.
void update_h(SolverState& state, const SolverConfig& cfg);

// One or more regularized alternating least-squares passes over the factors
// in the order A2, A3, A1. A2 is solved blockwise in the natural frame; A3
// and A1 reduce to the same machinery in the once- and twice-transposed
// frames. Per-block ridge systems use ratio mu/lambda.
void rals_sweep(SolverState& state, const SolverConfig& cfg);

// X <- observed values on the mask, bmp(A1,A2,A3) elsewhere.
void update_x(SolverState& state, const ObservationMask& mask,
              int threads = 1);

// Y_i <- Y_i + mu*(H_i - A_i); then mu <- min(rho*mu, mu_max).
void update_duals_and_mu(SolverState& state, const SolverConfig& cfg);

// Model objective: sum_i alpha_i * sum_t ||slice_t(A_i)||_* +
// (lambda/2) * ||X - bmp(A1,A2,A3)||_F^2.
double objective_value(const SolverState& state, const SolverConfig& cfg);

struct RunResult {
  Tensor3 x;
  BmFactors factors;
  SolverReport report;
};

// Full ADMM loop: update_h -> rals_sweep -> update_x -> update_duals_and_mu
// until the iteration cap, the tolerance (RE when ground truth is given,
// relative iterate change otherwise), or a non-finite fit term (diverged).
// The result is a pure function of (mask, cfg) regardless of cfg.threads.
RunResult run(const ObservationMask& mask, const SolverConfig& cfg,
              const Tensor3* ground_truth = nullptr);

}  // namespace bmtc
