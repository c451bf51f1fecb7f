// SPDX-License-Identifier: Apache-2.0

#include "rolecast/rng.hpp"

#include <cmath>
#include <numbers>

#include "rolecast/errors.hpp"

namespace rolecast {

std::uint64_t fnv1a64_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string digest_hex(std::uint64_t digest) {
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[digest & 0xf];
        digest >>= 4;
    }
    return out;
}

double RandomStream::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal(double mean, double stddev) {
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double mag = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * mag * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RandomStream::uniform_index(std::size_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
    auto idx = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return idx >= n ? n - 1 : idx;
}

std::size_t RandomStream::categorical(std::span<const double> probs) {
    if (probs.empty()) throw InvalidArgument("categorical: empty distribution");
    double u = uniform01();
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return i;
    }
    return probs.size() - 1;
}

bool RandomStream::bernoulli(double p) { return uniform01() < p; }

}  // namespace rolecast
