#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace voxsr::rng {

// splitmix64 finaliser; the generator below is counter-based, so draw i of
// a stream never depends on how many draws were taken before it.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Independent sub-stream for a (seed, stream id) pair.
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ull));
}

constexpr std::uint64_t bits(std::uint64_t seed, std::uint64_t counter) noexcept {
    return mix64(seed + mix64(counter));
}

// Uniform in the open interval (0, 1).
inline double uniform(std::uint64_t seed, std::uint64_t counter) noexcept {
    return (static_cast<double>(bits(seed, counter) >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller on the counter pair (2m, 2m+1); even
// indices take the cosine branch, odd the sine branch.
inline double normal(std::uint64_t seed, std::uint64_t index) noexcept {
    const std::uint64_t pair = index >> 1;
    const double u1 = uniform(seed, 2 * pair);
    const double u2 = uniform(seed, 2 * pair + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return (index & 1u) ? r * std::sin(a) : r * std::cos(a);
}

// Uniform integer in [0, n) (n > 0), by multiply-shift on 64 bits.
inline std::uint64_t below(std::uint64_t seed, std::uint64_t counter, std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(seed, counter)) * n) >> 64);
}

}  // namespace voxsr::rng
