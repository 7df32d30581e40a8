#pragma once

// Deterministic randomness helpers. std::mt19937 is fully specified by the
// standard; the distributions here avoid std::uniform_int_distribution and
// friends, whose outputs vary across standard libraries.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace locrank::rng {

// Unbiased draw from [0, n) by rejection.
inline std::uint32_t bounded(std::mt19937& gen, std::uint32_t n) {
    if (n <= 1) {
        return 0;
    }
    const std::uint32_t limit = UINT32_MAX - UINT32_MAX % n;
    std::uint32_t x;
    do {
        x = gen();
    } while (x >= limit);
    return x % n;
}

// Double in [0, 1) with 53 random bits.
inline double unit_real(std::mt19937& gen) {
    const std::uint64_t hi = gen();
    const std::uint64_t lo = gen();
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller.
inline double gaussian(std::mt19937& gen) {
    double u1 = unit_real(gen);
    while (u1 == 0.0) {
        u1 = unit_real(gen);
    }
    const double u2 = unit_real(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
}

// Fisher-Yates with bounded draws.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937& gen) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = bounded(gen, static_cast<std::uint32_t>(i));
        std::swap(v[i - 1], v[j]);
    }
}

inline std::vector<std::size_t> permutation(std::size_t n, std::mt19937& gen) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = i;
    }
    shuffle(p, gen);
    return p;
}

} // namespace locrank::rng
