#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace staggercast {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

/// Exponential variate with the given rate (> 0).
double exponential(Rng& rng, double rate);

/// Derive an independent stream seed from a base seed and a list of labels (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> labels);

}  // namespace staggercast
