#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace lmroute {

// All randomized code in this project draws through these helpers. mt19937_64's
// raw output sequence is fixed by the standard, while std::uniform_*_distribution
// and std::shuffle are implementation-defined; going through explicit reductions
// keeps every seeded run reproducible across toolchains.
using Rng = std::mt19937_64;

// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t next_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

// Uniform double in [0, 1) with 53 bits of precision.
inline double next_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double next_in(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * next_unit(rng);
}

// Uniform integer in [lo, hi] inclusive.
inline std::int64_t next_int_in(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

// Fisher-Yates shuffle driven by next_below.
template <typename T>
void shuffle_seeded(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(next_below(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace lmroute
