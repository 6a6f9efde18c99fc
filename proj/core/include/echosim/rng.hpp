#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace echosim::rng {

// splitmix64; used to derive independent substream seeds from a master seed
// so that results do not depend on the order substreams are consumed in.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    return mix(master ^ mix(index + 1));
}

// Uniform double in [0, 1) built directly from the engine's bits.
// std::uniform_real_distribution is avoided for anything that feeds a
// reproducibility contract.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Box-Muller without caching; one value per call keeps draw counts predictable.
inline double normal(std::mt19937_64& gen, double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform01(gen);
    double u2 = uniform01(gen);
    while (u1 <= 0.0) u1 = uniform01(gen);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace echosim::rng
