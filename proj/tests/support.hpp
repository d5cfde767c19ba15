#pragma once

// Shared fixtures and random generators for the unit tests.

#include <cmath>
#include <numbers>
#include <random>

#include "dvoc/control.hpp"
#include "dvoc/sim.hpp"

namespace dvoc::test {

inline constexpr double kOmega60 = 2.0 * std::numbers::pi * 60.0;
inline constexpr double kTestbedVStar = 120.0 * std::numbers::sqrt2;

inline DvocParams fig2_params() { return DvocParams({43.43, 0.9722, std::numbers::pi / 2.0}, {0.5, 0.0, 1.0}, kOmega60); }

inline DvocParams testbed_params() {
    return DvocParams({21.71, 0.9722, std::numbers::pi / 2.0}, {500.0, -125.0, kTestbedVStar}, kOmega60);
}

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    AlphaBetaVec vec(double scale) { return {uniform(-scale, scale), uniform(-scale, scale)}; }

    DvocParams params() {
        return DvocParams({uniform(0.5, 60.0), uniform(0.1, 5.0), uniform(0.0, std::numbers::pi)},
                          {uniform(-2.0, 2.0), uniform(-2.0, 2.0), uniform(0.5, 200.0)}, uniform(50.0, 500.0));
    }

private:
    std::mt19937_64 rng_;
};

inline double rel_diff(double x, double y, double floor = 1e-300) {
    return std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor});
}

}  // namespace dvoc::test
