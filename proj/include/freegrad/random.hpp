// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded random number generation. Normal draws go through Box-Muller on top
// of mt19937_64 rather than std::normal_distribution so that a given seed
// yields the same stream on every platform and standard library.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "freegrad/tensor.hpp"

namespace freegrad {

using RngSeed = std::uint64_t;

class Rng {
public:
    explicit Rng(RngSeed seed) : engine_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller; u1 is kept away from zero so the log is finite.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("index() on empty range");
        return static_cast<std::size_t>(engine_() % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::swap(v[i], v[index(i + 1)]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline Tensor gaussian_tensor(Rng& rng, Shape shape, double mean, double variance) {
    if (variance < 0.0) throw std::invalid_argument("negative variance in gaussian_tensor");
    const double sd = std::sqrt(variance);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(mean, sd);
    return t;
}

inline Tensor gaussian_init(Shape shape, double mean, double variance, RngSeed seed) {
    Rng rng(seed);
    return gaussian_tensor(rng, std::move(shape), mean, variance);
}

}  // namespace freegrad
