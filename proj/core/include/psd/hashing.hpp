#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace psd {

// Deterministic, platform-independent mixing. All synthetic randomness in the
// library is derived from these instead of std:: distributions, whose output
// is implementation-defined.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_words(std::initializer_list<uint64_t> words) {
    uint64_t h = 0x8f1bbcdcbfa53e0bull;
    for (uint64_t w : words) {
        h = splitmix64(h ^ w);
    }
    return h;
}

// Uniform in [0, 1).
inline double hash_u01(uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline uint64_t fnv1a64(const void * data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto * p = static_cast<const unsigned char *>(data);
    for (size_t i = 0; i < n; ++i) {
        h = (h ^ p[i]) * 0x100000001b3ull;
    }
    return h;
}

// Confidences live on a 1e-9 grid everywhere (emission, traces, audits), so
// serialized fixed 9-digit decimals round-trip to the exact in-memory double.
inline double quantize_confidence(double c) {
    double q = std::nearbyint(c * 1e9) / 1e9;
    if (q < 1e-9) q = 1e-9;
    if (q > 1.0) q = 1.0;
    return q;
}

}  // namespace psd
