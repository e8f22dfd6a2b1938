#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace chaosmom {

/// Seeded random stream. Seeding goes through std::seed_seq, whose output is
/// fixed by the standard, so a (seed, tags...) pair reproduces the same draws
/// on every conforming platform.
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
        std::vector<std::uint32_t> words;
        words.reserve(2 + 2 * tags.size());
        auto push = [&](std::uint64_t v) {
            words.push_back(static_cast<std::uint32_t>(v));
            words.push_back(static_cast<std::uint32_t>(v >> 32));
        };
        push(seed);
        for (auto t : tags) push(t);
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Unit exponential by inversion; finite for every draw.
    double exponential() { return -std::log1p(-uniform()); }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        // Lemire's multiply-shift; the bias is below 2^-64 * n and irrelevant here.
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

private:
    std::mt19937_64 engine_;
};

/// Derive a child seed from a parent seed and a tag (e.g. an experiment
/// purpose), so independent pieces of one run never share a stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    Stream s(seed, {0x5eedULL, tag});
    return s.next_u64();
}

} // namespace chaosmom
