#pragma once

#include <array>
#include <cstddef>

#include "bmtc/matrix.hpp"
#include "bmtc/solver.hpp"
#include "bmtc/tensor.hpp"

namespace bmtc {

// Baseline configuration. rho_penalty is the benchmark value 1e-6;
// rho_growth multiplies the penalty after every iteration (the customary
// increasing schedule), 1 keeps it constant. alphas must sum to 1.
struct HalrtcConfig {
  double rho_penalty = 1e-6;
  double rho_growth = 1.1;
  std::array<double, 3> alphas{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::size_t max_iters = 200;
  double tol = 1e-4;
  int threads = 1;

  void validate() const;
};

// Mode-n unfolding, modes numbered 1..3. Rows carry the mode's own index;
// columns enumerate the remaining two indices in cyclic order:
//   mode 1: entry (i, j*n3 + k)
//   mode 2: entry (j, k*n1 + i)
//   mode 3: entry (k, i*n2 + j)
Matrix unfold(const Tensor3& x, int mode);

// Inverse of unfold. Throws std::invalid_argument when the matrix shape is
// inconsistent with (mode, dims).
Tensor3 fold(const Matrix& m, int mode, Dims dims);

struct HalrtcResult {
  Tensor3 x;
  SolverReport report;
};

// ADMM over the nuclear norms of the three unfoldings:
//   M_i <- fold(svt(unfold(X + Y_i/rho, i), alpha_i/rho), i)
//   X   <- mean_i(M_i - Y_i/rho), observed entries reset to the data
//   Y_i <- Y_i - rho*(M_i - X)
// Same record schema as the factor solver; the mu column carries the rho
// active during the iteration, the fit term is sum_i (rho/2)*||X - M_i||_F^2.
// Stops on the iteration cap, on RE < tol when ground truth is given, on
// relative iterate change < tol otherwise; non-finite iterates end the run
// with status diverged.
HalrtcResult halrtc_run(const ObservationMask& mask, const HalrtcConfig& cfg,
                        const Tensor3* ground_truth = nullptr);

}  // namespace bmtc
