#pragma once

#include <cstddef>

namespace bmtc::kernels {

// Function table for the data-parallel inner loops everything else is built
// on. The scalar table is the reference semantics; the AVX2 table must agree
// with it elementwise up to fused-multiply-add contraction (1 ulp) and, for
// the reductions, up to reassociation error. Equivalence between the two is
// enforced by tests/test_kernels.cpp.
struct Ops {
  // sum_i x[i]*y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum_i x[i]*x[i]
  double (*sum_sq)(const double* x, std::size_t n);
  // out[i] = x[i] * y[i]
  void (*mul)(double* out, const double* x, const double* y, std::size_t n);
  // out[i] += a * x[i]
  void (*axpy)(double* out, const double* x, double a, std::size_t n);
  // out[i] += s * x[i] * y[i]
  void (*fma3)(double* out, const double* x, const double* y, double s,
               std::size_t n);
  // out[i] = a[i] + s * b[i]
  void (*add_scaled)(double* out, const double* a, const double* b, double s,
                     std::size_t n);
  // out[i] += s * (x[i] - y[i])
  void (*acc_scaled_diff)(double* out, const double* x, const double* y,
                          double s, std::size_t n);
};

enum class Backend { scalar, avx2 };

const Ops& scalar_ops();
const Ops& avx2_ops();  // identical to scalar_ops() on non-x86 builds

// True when AVX2+FMA code was compiled in and the CPU reports support.
bool avx2_supported();

// Active table. The default is avx2 when supported, scalar otherwise; the
// environment variable BMTC_KERNELS=scalar|avx2 overrides the default.
// Switching backends mid-run is not thread-safe: pick one before spawning
// workers.
const Ops& ops();
Backend active_backend();
void set_backend(Backend b);  // throws std::invalid_argument if unsupported
const char* backend_name(Backend b);

namespace detail {
bool avx2_object_code();
}

}  // namespace bmtc::kernels
