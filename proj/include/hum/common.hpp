#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Shared utilities: deterministic random primitives, hashing, number
// formatting. All randomness in the library flows through rng_t with the
// distributions below; std:: distributions are avoided because their output
// is implementation-defined and runs must reproduce bit-exactly.

namespace hum {

using rng_t = std::mt19937_64;

// SplitMix64 finalizer, used to derive independent sub-seeds from a master
// seed and a stream tag.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream));
}

// Uniform double in [0, 1) with 53 random mantissa bits.
inline double uniform01(rng_t& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, n).
inline std::uint64_t uniform_below(rng_t& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const std::uint64_t threshold = (std::numeric_limits<std::uint64_t>::max() / n) * n;
    std::uint64_t x = rng();
    while (x >= threshold) x = rng();
    return x % n;
}

// Standard normal via Box-Muller. Consumes exactly two draws per call; the
// second variate is discarded so the stream position is input-independent.
inline double normal01(rng_t& rng) {
    const double u1 = 1.0 - uniform01(rng); // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <typename T>
void shuffle_inplace(std::vector<T>& v, rng_t& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// FNV-1a, used for vocabulary and file fingerprints.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// Shortest round-trip decimal form; identical input bits give identical text,
// which the byte-identical history/report determinism contract relies on.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool is_finite(double v) { return std::isfinite(v); }

} // namespace hum
