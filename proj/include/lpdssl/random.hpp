#pragma once

#include <cmath>
#include <numbers>
#include <random>

namespace lpdssl::detail {

// mt19937 output mapped by hand: std::uniform_real_distribution and
// std::normal_distribution are unspecified across standard library
// versions, and seeded runs must be byte-for-byte reproducible.

inline double uniform01(std::mt19937& rng) {
    return std::ldexp(static_cast<double>(rng()), -32);  // [0, 1)
}

inline double gaussian(std::mt19937& rng) {
    double u1 = uniform01(rng);
    while (u1 == 0.0) u1 = uniform01(rng);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace lpdssl::detail
