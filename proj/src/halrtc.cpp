#include "bmtc/halrtc.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <utility>

#include "bmtc/linalg.hpp"

namespace bmtc {

void HalrtcConfig::validate() const {
  if (!std::isfinite(rho_penalty) || rho_penalty <= 0.0)
    throw std::invalid_argument("HalrtcConfig: rho_penalty must be positive");
  if (!std::isfinite(rho_growth) || rho_growth < 1.0)
    throw std::invalid_argument("HalrtcConfig: rho_growth must be at least 1");
  double sum = 0.0;
  for (double a : alphas) {
    if (!std::isfinite(a) || a < 0.0)
      throw std::invalid_argument("HalrtcConfig: alphas must be nonnegative");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("HalrtcConfig: alphas must sum to 1");
  if (max_iters == 0)
    throw std::invalid_argument("HalrtcConfig: max_iters must be positive");
  if (!(tol >= 0.0))
    throw std::invalid_argument("HalrtcConfig: tol must be nonnegative");
  if (threads < 1)
    throw std::invalid_argument("HalrtcConfig: threads must be at least 1");
}

Matrix unfold(const Tensor3& x, int mode) {
  const std::size_t n1 = x.n1(), n2 = x.n2(), n3 = x.n3();
  switch (mode) {
    case 1: {
      // Row i is the contiguous (j,k) block of the tensor buffer.
      Matrix m(n1, n2 * n3);
      std::memcpy(m.data(), x.data(), x.size() * sizeof(double));
      return m;
    }
    case 2: {
      Matrix m(n2, n3 * n1);
      for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
          for (std::size_t k = 0; k < n3; ++k) m(j, k * n1 + i) = x(i, j, k);
      return m;
    }
    case 3: {
      Matrix m(n3, n1 * n2);
      for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
          for (std::size_t k = 0; k < n3; ++k) m(k, i * n2 + j) = x(i, j, k);
      return m;
    }
    default:
      throw std::invalid_argument("unfold: mode must be 1, 2 or 3");
  }
}

Tensor3 fold(const Matrix& m, int mode, Dims dims) {
  const std::size_t n1 = dims.n1, n2 = dims.n2, n3 = dims.n3;
  const auto expect = [&m](std::size_t r, std::size_t c) {
    if (m.rows() != r || m.cols() != c)
      throw std::invalid_argument("fold: matrix shape does not match mode and dims");
  };
  Tensor3 x(dims);
  switch (mode) {
    case 1:
      expect(n1, n2 * n3);
      std::memcpy(x.data(), m.data(), x.size() * sizeof(double));
      return x;
    case 2:
      expect(n2, n3 * n1);
      for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
          for (std::size_t k = 0; k < n3; ++k) x(i, j, k) = m(j, k * n1 + i);
      return x;
    case 3:
      expect(n3, n1 * n2);
      for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
          for (std::size_t k = 0; k < n3; ++k) x(i, j, k) = m(k, i * n2 + j);
      return x;
    default:
      throw std::invalid_argument("fold: mode must be 1, 2 or 3");
  }
}

namespace {

void impose_observed(Tensor3& x, const ObservationMask& mask) {
  const auto flags = mask.flags();
  const auto vals = mask.values();
  double* p = x.data();
  std::size_t c = 0;
  for (std::size_t idx = 0; idx < flags.size(); ++idx) {
    if (flags[idx]) p[idx] = vals[c++];
  }
}

double distance_sq(const Tensor3& a, const Tensor3& b) {
  const double* pa = a.data();
  const double* pb = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

HalrtcResult halrtc_run(const ObservationMask& mask, const HalrtcConfig& cfg,
                        const Tensor3* ground_truth) {
  cfg.validate();
  const Dims dims = mask.dims();
  if (dims.count() == 0)
    throw std::invalid_argument("halrtc_run: mask dims must be nonzero");
  for (double v : mask.values()) {
    if (!std::isfinite(v))
      throw std::domain_error("halrtc_run: observed values must be finite");
  }
  if (ground_truth) {
    if (!(ground_truth->dims() == dims))
      throw std::invalid_argument("halrtc_run: ground truth dims do not match the mask");
    if (!ground_truth->all_finite())
      throw std::domain_error("halrtc_run: ground truth must be finite");
    if (!(frobenius_norm(*ground_truth) > 0.0))
      throw std::invalid_argument("halrtc_run: ground truth must be nonzero");
  }

  const auto t_start = std::chrono::steady_clock::now();

  Tensor3 x = mask.to_tensor(0.0);
  std::array<Tensor3, 3> m{Tensor3(dims), Tensor3(dims), Tensor3(dims)};
  std::array<Tensor3, 3> y{Tensor3(dims), Tensor3(dims), Tensor3(dims)};
  double rho = cfg.rho_penalty;

  SolverReport report;
  report.records.reserve(cfg.max_iters);

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const double rho_used = rho;

    // The three mode updates are independent; the SVD inside each one is
    // sequential.
#pragma omp parallel for num_threads(std::min(cfg.threads, 3)) schedule(static)
    for (int i = 0; i < 3; ++i) {
      Tensor3 target(dims);
      const double* xp = x.data();
      const double* yp = y[i].data();
      double* tp = target.data();
      for (std::size_t idx = 0; idx < target.size(); ++idx)
        tp[idx] = xp[idx] + yp[idx] / rho_used;
      if (cfg.alphas[i] == 0.0) {
        m[i] = std::move(target);
      } else {
        m[i] = fold(svt(unfold(target, i + 1), cfg.alphas[i] / rho_used),
                    i + 1, dims);
      }
    }

    const Tensor3 x_prev = std::move(x);
    x = Tensor3(dims);
    {
      double* xp = x.data();
      for (int i = 0; i < 3; ++i) {
        const double* mp = m[i].data();
        const double* yp = y[i].data();
        for (std::size_t idx = 0; idx < x.size(); ++idx)
          xp[idx] += mp[idx] - yp[idx] / rho_used;
      }
      for (std::size_t idx = 0; idx < x.size(); ++idx) xp[idx] /= 3.0;
    }
    impose_observed(x, mask);

    double fit = 0.0;
    for (int i = 0; i < 3; ++i) fit += 0.5 * rho_used * distance_sq(x, m[i]);

    for (int i = 0; i < 3; ++i) {
      double* yp = y[i].data();
      const double* mp = m[i].data();
      const double* xp = x.data();
      for (std::size_t idx = 0; idx < x.size(); ++idx)
        yp[idx] -= rho_used * (mp[idx] - xp[idx]);
    }
    rho = rho_used * cfg.rho_growth;

    const double rel_change = std::sqrt(distance_sq(x, x_prev)) /
                              std::max(frobenius_norm(x_prev), 1e-12);
    const double re = ground_truth
                          ? relative_error(x, *ground_truth)
                          : std::numeric_limits<double>::quiet_NaN();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    report.records.push_back({it, re, rel_change, fit, rho_used, secs});

    if (!std::isfinite(fit) || !x.all_finite()) {
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
  return HalrtcResult{std::move(x), std::move(report)};
}

}  // namespace bmtc
