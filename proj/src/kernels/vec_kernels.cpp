#include "locrank/kernels/vec_kernels.hpp"

#include "locrank/errors.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace locrank::kernels {

namespace scalar {

float dot_f32(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void dot_batch_f32(const float* query, const float* rows, std::size_t count,
                   std::size_t dim, float* out) {
    for (std::size_t r = 0; r < count; ++r) {
        out[r] = dot_f32(query, rows + r * dim, dim);
    }
}

} // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define LOCRANK_KERNELS_X86 1
#else
#define LOCRANK_KERNELS_X86 0
#endif

#if defined(__aarch64__) || defined(_M_ARM64)
#define LOCRANK_KERNELS_ARM64 1
#else
#define LOCRANK_KERNELS_ARM64 0
#endif

#if LOCRANK_KERNELS_X86
// Defined in vec_kernels_avx2.cpp, compiled with -mavx2 -mfma.
namespace avx2 {
float dot_f32(const float* a, const float* b, std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
void dot_batch_f32(const float* query, const float* rows, std::size_t count,
                   std::size_t dim, float* out);
} // namespace avx2
#endif

#if LOCRANK_KERNELS_ARM64
// Defined in vec_kernels_neon.cpp. NEON is baseline on aarch64.
namespace neon {
float dot_f32(const float* a, const float* b, std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
void dot_batch_f32(const float* query, const float* rows, std::size_t count,
                   std::size_t dim, float* out);
} // namespace neon
#endif

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

namespace {

bool backend_usable(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if LOCRANK_KERNELS_X86
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::neon:
#if LOCRANK_KERNELS_ARM64
            return true;
#else
            return false;
#endif
    }
    return false;
}

Backend pick_default() {
    if (const char* env = std::getenv("LOCRANK_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && backend_usable(Backend::avx2)) return Backend::avx2;
        if (std::strcmp(env, "neon") == 0 && backend_usable(Backend::neon)) return Backend::neon;
        return Backend::scalar;
    }
    if (backend_usable(Backend::avx2)) return Backend::avx2;
    if (backend_usable(Backend::neon)) return Backend::neon;
    return Backend::scalar;
}

std::atomic<Backend> g_backend{pick_default()};

} // namespace

std::vector<Backend> available_backends() {
    std::vector<Backend> out{Backend::scalar};
    if (backend_usable(Backend::avx2)) out.push_back(Backend::avx2);
    if (backend_usable(Backend::neon)) out.push_back(Backend::neon);
    return out;
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void force_backend(Backend b) {
    if (!backend_usable(b)) {
        throw ConfigError(std::string("kernel backend not available: ") + backend_name(b));
    }
    g_backend.store(b, std::memory_order_relaxed);
}

float dot_f32(const float* a, const float* b, std::size_t n) {
    switch (active_backend()) {
#if LOCRANK_KERNELS_X86
        case Backend::avx2: return avx2::dot_f32(a, b, n);
#endif
#if LOCRANK_KERNELS_ARM64
        case Backend::neon: return neon::dot_f32(a, b, n);
#endif
        default: return scalar::dot_f32(a, b, n);
    }
}

double dot_f64(const double* a, const double* b, std::size_t n) {
    switch (active_backend()) {
#if LOCRANK_KERNELS_X86
        case Backend::avx2: return avx2::dot_f64(a, b, n);
#endif
#if LOCRANK_KERNELS_ARM64
        case Backend::neon: return neon::dot_f64(a, b, n);
#endif
        default: return scalar::dot_f64(a, b, n);
    }
}

void dot_batch_f32(const float* query, const float* rows, std::size_t count,
                   std::size_t dim, float* out) {
    switch (active_backend()) {
#if LOCRANK_KERNELS_X86
        case Backend::avx2: avx2::dot_batch_f32(query, rows, count, dim, out); return;
#endif
#if LOCRANK_KERNELS_ARM64
        case Backend::neon: neon::dot_batch_f32(query, rows, count, dim, out); return;
#endif
        default: scalar::dot_batch_f32(query, rows, count, dim, out); return;
    }
}

} // namespace locrank::kernels
