#include "raglab/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>

namespace raglab::kernels {

double dot_scalar(std::span<const float> a, std::span<const float> b) noexcept {
  double sum = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

void batch_dot_scalar(std::span<const float> query, const float* rows,
                      std::size_t row_count, std::size_t dim,
                      double* out) noexcept {
  for (std::size_t r = 0; r < row_count; ++r) {
    out[r] = dot_scalar(query, std::span<const float>(rows + r * dim, dim));
  }
}

namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("RAGLAB_KERNEL")) {
    std::string_view v(env);
    if (v == "scalar") return Backend::kScalar;
    if (v == "avx2" && cpu_has_avx2()) return Backend::kAvx2;
  }
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& backend_slot() noexcept {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

bool backend_available(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
      return cpu_has_avx2();
  }
  return false;
}

Backend active_backend() noexcept { return backend_slot().load(); }

void set_backend(Backend backend) {
  if (!backend_available(backend)) {
    throw std::invalid_argument("kernel backend not available on this CPU: " +
                                backend_name(backend));
  }
  backend_slot().store(backend);
}

std::string backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

double dot(std::span<const float> a, std::span<const float> b) noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_backend() == Backend::kAvx2) return dot_avx2(a, b);
#endif
  return dot_scalar(a, b);
}

void batch_dot(std::span<const float> query, const float* rows,
               std::size_t row_count, std::size_t dim, double* out) noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_backend() == Backend::kAvx2) {
    batch_dot_avx2(query, rows, row_count, dim, out);
    return;
  }
#endif
  batch_dot_scalar(query, rows, row_count, dim, out);
}

}  // namespace raglab::kernels
