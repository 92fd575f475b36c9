#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace ren {

using Rng = std::mt19937_64;

/// Derives an independent generator from a master seed and a stream name
/// ("env", "model-init", "policy", "user-draws", ...). Two different names
/// under one master seed never share state.
inline Rng make_stream(std::uint64_t master_seed, std::string_view name) {
    // FNV-1a over the name, then a splitmix64 finalizer over seed ^ hash.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = master_seed ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return Rng(z);
}

/// Uniform index in [0, n). Uses the generator's raw output rather than
/// std::uniform_int_distribution so that sequences are stable across
/// standard library implementations.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    // Multiply-shift reduction; bias is below n / 2^64.
    const auto x = rng();
    return static_cast<std::size_t>((static_cast<unsigned __int128>(x) * n) >> 64);
}

/// Uniform real in [0, 1) with 53 bits of randomness.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on uniform_unit (implementation-stable).
inline double standard_normal(Rng& rng) {
    double u1 = uniform_unit(rng);
    while (u1 <= 0.0) u1 = uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace ren
