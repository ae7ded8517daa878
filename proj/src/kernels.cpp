#include "bmtc/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace bmtc::kernels {

bool avx2_supported() {
#if defined(__x86_64__)
  return detail::avx2_object_code() && __builtin_cpu_supports("avx2") &&
         __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("BMTC_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& current() {
  static Backend b = initial_backend();
  return b;
}

}  // namespace

Backend active_backend() { return current(); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported())
    throw std::invalid_argument("kernel backend avx2 not supported on this host");
  current() = b;
}

const Ops& ops() {
  return current() == Backend::avx2 ? avx2_ops() : scalar_ops();
}

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace bmtc::kernels
