#pragma once

#include <cstdint>
#include <random>

namespace ungap {

// splitmix64: cheap stateless mixer used to derive independent sub-seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-sample / per-stream seed derivation: hash(global_seed, index...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(seed ^ (a * 0x9e3779b97f4a7c15ULL)) ^ b);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
    std::uniform_int_distribution<int> d(lo, hi);
    return d(rng);
}

inline double gaussian(std::mt19937_64& rng, double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(rng);
}

}  // namespace ungap
