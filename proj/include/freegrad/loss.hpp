// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar losses and their output-gradients. Losses stay outside the graph;
// every engine takes the gradient at the output vertex as its seed.

#pragma once

#include <cmath>
#include <stdexcept>

#include "freegrad/tensor.hpp"

namespace freegrad {

inline double mse_value(const Tensor& pred, const Tensor& target) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s;
}

inline Tensor mse_grad(const Tensor& pred, const Tensor& target) {
    Tensor g(pred.shape());
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] = 2.0 * (pred[i] - target[i]);
    return g;
}

inline Tensor softmax(const Tensor& logits) {
    Tensor p(logits.shape());
    double mx = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= z;
    return p;
}

inline double cross_entropy_value(const Tensor& logits, const Tensor& target) {
    const Tensor p = softmax(logits);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (target[i] != 0.0) s -= target[i] * std::log(std::max(p[i], 1e-300));
    }
    return s;
}

inline Tensor cross_entropy_grad(const Tensor& logits, const Tensor& target) {
    Tensor g = softmax(logits);
    g -= target;
    return g;
}

}  // namespace freegrad
