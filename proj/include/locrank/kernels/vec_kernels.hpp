#pragma once

// Dense vector arithmetic used by the similarity search and training paths.
// Scalar reference kernels always exist; SIMD variants (AVX2 on x86-64, NEON
// on aarch64) are compiled when the toolchain supports them and selected at
// runtime from CPU capabilities. The environment variable LOCRANK_SIMD
// (values: scalar, avx2, neon) overrides the automatic choice.

#include <cstddef>
#include <string>
#include <vector>

namespace locrank::kernels {

enum class Backend { scalar, avx2, neon };

const char* backend_name(Backend b);

// Backends compiled into this binary AND usable on the running CPU.
// Always contains Backend::scalar.
std::vector<Backend> available_backends();

// Backend the dispatched entry points currently use.
Backend active_backend();

// Force a specific backend for this process. Throws ConfigError if the
// backend is not available. Intended for tests and benchmarking.
void force_backend(Backend b);

// Dispatched entry points. dot_* compute an inner product; dot_batch_f32
// scores one query against `count` row-major rows of length `dim`.
float dot_f32(const float* a, const float* b, std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
void dot_batch_f32(const float* query, const float* rows, std::size_t count,
                   std::size_t dim, float* out);

// Scalar reference implementations, callable directly (equivalence tests).
namespace scalar {
float dot_f32(const float* a, const float* b, std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
void dot_batch_f32(const float* query, const float* rows, std::size_t count,
                   std::size_t dim, float* out);
} // namespace scalar

} // namespace locrank::kernels
