#pragma once

#include <adawave/tensor.hpp>

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace adawave {

using Rng = std::mt19937_64;

/// Generator seeded from a base seed and a list of stream identifiers, so that
/// independent consumers (windows, epochs, cells) get reproducible streams.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
    std::vector<std::uint32_t> words;
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    for (auto s : stream) {
        words.push_back(static_cast<std::uint32_t>(s));
        words.push_back(static_cast<std::uint32_t>(s >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

inline Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor(std::move(shape), std::move(v));
}

inline Tensor normal(Shape shape, double mean, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor(std::move(shape), std::move(v));
}

} // namespace adawave
