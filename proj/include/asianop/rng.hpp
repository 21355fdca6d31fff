#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace asianop {

// Philox 4x32-10 counter-based generator (Salmon et al., SC 2011).
// Every draw is a pure function of (seed, stream, step, slot), so results
// never depend on how work is distributed over threads or blocks.
namespace philox {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kW32A = 0x9E3779B9u;
    constexpr std::uint32_t kW32B = 0xBB67AE85u;
    constexpr std::uint32_t kM4x32A = 0xD2511F53u;
    constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kM4x32A, ctr[0], lo0, hi0);
        mulhilo(kM4x32B, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW32A;
        key[1] += kW32B;
    }
    return ctr;
}

}  // namespace philox

// 53-bit uniform in the open interval (0,1)
inline double u01_from_bits(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
}

struct UniformPair {
    double u0;
    double u1;
};

inline UniformPair counter_uniforms(std::uint64_t seed, std::uint64_t stream,
                                    std::uint32_t step, std::uint32_t slot) {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(stream),
        static_cast<std::uint32_t>(stream >> 32),
        step,
        slot,
    };
    const std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32),
    };
    const auto out = philox::block(ctr, key);
    return {u01_from_bits(out[0], out[1]), u01_from_bits(out[2], out[3])};
}

struct NormalPair {
    double z0;
    double z1;
};

// Box-Muller on one Philox block
inline NormalPair counter_normals(std::uint64_t seed, std::uint64_t stream,
                                  std::uint32_t step, std::uint32_t slot = 0) {
    const UniformPair u = counter_uniforms(seed, stream, step, slot);
    const double rad = std::sqrt(-2.0 * std::log(u.u0));
    const double ang = 2.0 * std::numbers::pi * u.u1;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

inline double counter_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint32_t step) {
    return counter_normals(seed, stream, step).z0;
}

// cheap seed derivation for auxiliary streams (splitmix64 finalizer)
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace asianop
