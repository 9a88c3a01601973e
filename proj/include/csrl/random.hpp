#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace csrl {

// All stochastic components draw from an explicitly passed engine. Conversions
// to doubles and indices are done here rather than through <random>
// distributions so that streams are identical across standard libraries.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 bits of precision.
double uniform01(Rng& rng);

double uniform_real(Rng& rng, double lo, double hi);

// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

// splitmix64 mix of a base seed and a stream id; used to derive independent
// per-episode and per-component seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace csrl
