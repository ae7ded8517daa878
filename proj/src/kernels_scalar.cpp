#include "bmtc/kernels.hpp"

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_sq_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void mul_scalar(double* out, const double* x, const double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void axpy_scalar(double* out, const double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a * x[i];
}

void fma3_scalar(double* out, const double* x, const double* y, double s,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += s * x[i] * y[i];
}

void add_scaled_scalar(double* out, const double* a, const double* b, double s,
                       std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s * b[i];
}

void acc_scaled_diff_scalar(double* out, const double* x, const double* y,
                            double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += s * (x[i] - y[i]);
}

}  // namespace

namespace bmtc::kernels {

const Ops& scalar_ops() {
  static const Ops table{dot_scalar,  sum_sq_scalar,     mul_scalar,
                         axpy_scalar, fma3_scalar,       add_scaled_scalar,
                         acc_scaled_diff_scalar};
  return table;
}

}  // namespace bmtc::kernels
