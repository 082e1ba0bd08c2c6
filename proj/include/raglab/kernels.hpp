#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace raglab::kernels {

enum class Backend {
  kScalar,
  kAvx2,
};

/// Scalar reference kernel: sequential double accumulation over float inputs.
double dot_scalar(std::span<const float> a, std::span<const float> b) noexcept;

/// Scalar reference batch kernel: `rows` row-major vectors of length `dim`,
/// one dot product per row written to `out`.
void batch_dot_scalar(std::span<const float> query, const float* rows,
                      std::size_t row_count, std::size_t dim,
                      double* out) noexcept;

#if defined(__x86_64__) || defined(_M_X64)
double dot_avx2(std::span<const float> a, std::span<const float> b) noexcept;
void batch_dot_avx2(std::span<const float> query, const float* rows,
                    std::size_t row_count, std::size_t dim,
                    double* out) noexcept;
#endif

/// True if the CPU supports the backend.
bool backend_available(Backend backend) noexcept;

/// The backend picked at startup: AVX2 when the CPU has it, otherwise scalar.
/// The RAGLAB_KERNEL environment variable ("scalar" or "avx2") overrides.
Backend active_backend() noexcept;

/// Overrides the dispatched backend for this process. Throws
/// std::invalid_argument if the CPU lacks support.
void set_backend(Backend backend);

std::string backend_name(Backend backend);

/// Dot product via the active backend.
double dot(std::span<const float> a, std::span<const float> b) noexcept;

/// Batch dot products via the active backend.
void batch_dot(std::span<const float> query, const float* rows,
               std::size_t row_count, std::size_t dim, double* out) noexcept;

}  // namespace raglab::kernels
