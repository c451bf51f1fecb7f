// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness and content digests. All stochastic behavior in the
// project flows through RandomStream so that identical seeds give
// bit-identical results on any platform; mt19937_64 and the transforms
// below are fully specified, unlike the distribution classes in <random>.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace rolecast {

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a64_bytes(const void* data, std::size_t n);

// splitmix64 finalizer; bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// One stream per purpose: derive_seed(master, "corpus", role) etc.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t index = 0) {
    return mix64(master ^ mix64(fnv1a64(tag)) ^ (index * 0x9e3779b97f4a7c15ull + 1));
}

std::string digest_hex(std::uint64_t digest);

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // [0, 1)
    double uniform01();
    // Box-Muller; consumes two uniforms per call.
    double normal(double mean, double stddev);
    // [0, n); n must be positive.
    std::size_t uniform_index(std::size_t n);
    // Draw from a normalized categorical distribution.
    std::size_t categorical(std::span<const double> probs);
    bool bernoulli(double p);

private:
    std::mt19937_64 engine_;
};

}  // namespace rolecast
