// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Elementwise activation functions and their derivatives.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "freegrad/tensor.hpp"

namespace freegrad {

enum class ActivationKind { identity, relu, tanh, sigmoid };

inline const char* activation_name(ActivationKind k) {
    switch (k) {
        case ActivationKind::identity: return "identity";
        case ActivationKind::relu: return "relu";
        case ActivationKind::tanh: return "tanh";
        case ActivationKind::sigmoid: return "sigmoid";
    }
    return "?";
}

inline ActivationKind activation_from_name(const std::string& name) {
    if (name == "identity") return ActivationKind::identity;
    if (name == "relu") return ActivationKind::relu;
    if (name == "tanh") return ActivationKind::tanh;
    if (name == "sigmoid") return ActivationKind::sigmoid;
    throw std::invalid_argument("unknown activation: " + name);
}

inline double activation_scalar(ActivationKind k, double x) {
    switch (k) {
        case ActivationKind::identity: return x;
        case ActivationKind::relu: return x > 0.0 ? x : 0.0;
        case ActivationKind::tanh: return std::tanh(x);
        case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

// Subgradient convention: relu'(0) = 0.
inline double activation_deriv_scalar(ActivationKind k, double x) {
    switch (k) {
        case ActivationKind::identity: return 1.0;
        case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
        case ActivationKind::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case ActivationKind::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
    }
    return 1.0;
}

inline Tensor activation_apply(ActivationKind k, const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = activation_scalar(k, x[i]);
    return out;
}

inline Tensor activation_deriv(ActivationKind k, const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = activation_deriv_scalar(k, x[i]);
    return out;
}

}  // namespace freegrad
