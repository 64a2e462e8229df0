#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace abr {

/// The named generator behind every seeded shuffle. std::mt19937_64's output
/// sequence is fixed by the standard, unlike the std distributions.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    // Values below 2^64 mod bound would over-weight the low residues.
    const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
    std::uint64_t r = rng();
    while (r < threshold) r = rng();
    return r % bound;
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Fisher-Yates shuffle with a portable, fully specified draw sequence.
template <typename T>
void deterministic_shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(uniform_below(rng, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

} // namespace abr
