#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dctdrift {

using Rng = std::mt19937_64;

// Independent generator for a (seed, key...) tuple, e.g. (dataset seed,
// example index). Streams do not depend on the order in which they are made.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {})
{
    std::vector<std::uint32_t> words;
    words.reserve(2 * (keys.size() + 1));
    auto push = [&words](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto k : keys) push(k);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace dctdrift
