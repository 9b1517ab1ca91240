#ifndef STUDYREC_RNG_HPP
#define STUDYREC_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace studyrec {

/// splitmix64 finalizer; decorrelates nearby seed values.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a run seed and a purpose salt,
/// so the user split, fold shuffle and per-epoch holdouts never share a
/// stream even when the run seeds are consecutive integers.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt));
}

/// Fisher-Yates permutation of 0..n-1. Written out (rather than
/// std::shuffle) because the exact permutation for a given seed is part of
/// the reproducibility contract and must not depend on the standard library
/// implementation.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    std::mt19937_64 gen(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(gen() % i);
        std::swap(indices[i - 1], indices[j]);
    }
    return indices;
}

}  // namespace studyrec

#endif
