#pragma once
#include <cstdint>
#include <cmath>

namespace pacbayes {

// Counter-based pseudo-random streams built on the splitmix64 finalizer.
// A stream is identified by (seed, stream_id); the value at any counter can
// be computed independently of every other counter, so draws can be evaluated
// in any order (or from any thread) with identical results.
namespace rng {

inline constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27; x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream_id) {
    return mix64(seed + kWeyl) ^ mix64(stream_id * 0xD1342543DE82EF95ull + 0x2545F4914F6CDD1Dull);
}

// Value of stream `key` at position `counter`.
inline std::uint64_t at(std::uint64_t key, std::uint64_t counter) {
    return mix64(key + (counter + 1) * kWeyl);
}

// Uniform in [0,1) with 53 random bits.
inline double uniform(std::uint64_t key, std::uint64_t counter) {
    return static_cast<double>(at(key, counter) >> 11) * 0x1.0p-53;
}

// Uniform in (0,1]; safe as a log() argument.
inline double uniform_pos(std::uint64_t key, std::uint64_t counter) {
    return static_cast<double>((at(key, counter) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes counters 2k and 2k+1.
inline double normal(std::uint64_t key, std::uint64_t k) {
    const double u1 = uniform_pos(key, 2 * k);
    const double u2 = uniform(key, 2 * k + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Integer in [0, n) by the multiply-shift reduction.
inline std::uint64_t below(std::uint64_t key, std::uint64_t counter, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(at(key, counter)) * n) >> 64);
}

} // namespace rng
} // namespace pacbayes
