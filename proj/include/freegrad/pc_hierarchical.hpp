// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical predictive coding. Layers are stacked with the input clamped
// at the top and the output (or label) read off the bottom; each layer
// predicts the one below it through a weight matrix and activation, and the
// variational means relax on the squared prediction errors. Three structural
// relaxations are available: learnable backward weights in place of the
// transpose, dropped activation derivatives, and learned error connections.
//
// Layer indexing: 0 is the bottom (prediction target, e.g. the label layer),
// sizes.size()-1 is the top (clamped data). theta[l] predicts layer l from
// layer l+1. All per-layer tensors may carry a trailing batch dimension:
// a column per sample.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "freegrad/activation.hpp"
#include "freegrad/random.hpp"
#include "freegrad/tensor.hpp"

namespace freegrad {

struct PCConfig {
    double inference_rate = 0.1;
    std::size_t inference_iters = 100;
    double weight_rate = 0.005;
    double convergence_tol = 1e-7;
    bool learnable_backward_weights = false;
    bool drop_nonlinear_derivs = false;
    bool error_connection_weights = false;
};

struct HierarchicalPCNet {
    std::vector<std::size_t> sizes;  // bottom .. top
    std::vector<Tensor> theta;       // theta[l]: sizes[l] x sizes[l+1]
    std::vector<Tensor> tilde;       // optional backward weights, transpose shapes of theta
    std::vector<Tensor> psi;         // optional error connections, square per predicted layer
    ActivationKind activation = ActivationKind::tanh;

    std::size_t layers() const { return sizes.size(); }
    bool has_backward() const { return !tilde.empty(); }
    bool has_error_weights() const { return !psi.empty(); }
};

inline HierarchicalPCNet make_pc_net(std::vector<std::size_t> sizes, ActivationKind activation,
                                     RngSeed seed) {
    if (sizes.size() < 2) throw std::invalid_argument("make_pc_net needs >= 2 layers");
    HierarchicalPCNet net;
    net.sizes = std::move(sizes);
    net.activation = activation;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
        // Variance 1/fan_in keeps the forward sweep at unit scale.
        net.theta.push_back(gaussian_tensor(rng, {net.sizes[l], net.sizes[l + 1]}, 0.0,
                                            1.0 / static_cast<double>(net.sizes[l + 1])));
    }
    return net;
}

// Backward weights replace theta^T in the inference flow. Starting at the
// exact transpose preserves the symmetry under paired updates; a random start
// exercises the learned-alignment regime.
inline void enable_backward_weights(HierarchicalPCNet& net, bool init_transpose, RngSeed seed) {
    net.tilde.clear();
    Rng rng(seed);
    for (const Tensor& th : net.theta) {
        net.tilde.push_back(init_transpose
                                ? transpose(th)
                                : gaussian_tensor(rng, {th.cols(), th.rows()}, 0.0, 0.05));
    }
}

inline void enable_error_weights(HierarchicalPCNet& net, bool init_identity, RngSeed seed) {
    net.psi.clear();
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
        net.psi.push_back(init_identity ? Tensor::identity(net.sizes[l])
                                        : gaussian_tensor(rng, {net.sizes[l], net.sizes[l]}, 0.0,
                                                          0.05));
    }
}

// Per-layer beliefs and their bookkeeping. error[l] is the precision-weighted
// difference between signal (psi-mapped value, or the value itself) and the
// top-down prediction; the top layer has no predictor and carries zero error.
struct PCState {
    std::vector<Tensor> value;
    std::vector<Tensor> pre;         // theta[l] * value[l+1]
    std::vector<Tensor> prediction;  // f(pre[l])
    std::vector<Tensor> signal;      // psi[l] * value[l] when enabled, else value[l]
    std::vector<Tensor> error;
    std::vector<Tensor> precision;   // diagonal, default all ones
    std::vector<bool> clamped;
};

namespace detail {

inline void pc_refresh_layer(const HierarchicalPCNet& net, PCState& s, std::size_t l,
                             bool recompute_pre) {
    if (recompute_pre) {
        s.pre[l] = matmul(net.theta[l], s.value[l + 1]);
        s.prediction[l] = activation_apply(net.activation, s.pre[l]);
    }
    s.signal[l] = net.has_error_weights() ? matmul(net.psi[l], s.value[l]) : s.value[l];
    s.error[l] = hadamard(s.precision[l], s.signal[l] - s.prediction[l]);
}

}  // namespace detail

// Recompute predictions and errors from the current values. When only
// unclamped layers moved, predictions under a clamped parent are reused.
inline void pc_refresh(const HierarchicalPCNet& net, PCState& s, bool full = true) {
    const std::size_t top = net.layers() - 1;
    for (std::size_t l = 0; l < top; ++l) {
        detail::pc_refresh_layer(net, s, l, full || !s.clamped[l + 1]);
    }
    s.signal[top] = s.value[top];
    s.prediction[top] = s.value[top];
    if (s.error[top].shape() != s.value[top].shape()) s.error[top] = Tensor(s.value[top].shape());
}

// Feedforward initialization: clamp the top layer to the data and set every
// layer below to its top-down prediction, so all errors start at zero.
inline PCState pc_make_state(const HierarchicalPCNet& net, const Tensor& top_input) {
    const std::size_t n = net.layers();
    if (top_input.rows() != net.sizes[n - 1]) {
        throw std::invalid_argument("pc_make_state: input rows do not match the top layer");
    }
    PCState s;
    s.value.resize(n);
    s.pre.resize(n);
    s.prediction.resize(n);
    s.signal.resize(n);
    s.error.resize(n);
    s.precision.resize(n);
    s.clamped.assign(n, false);
    s.clamped[n - 1] = true;
    s.value[n - 1] = top_input;
    for (std::size_t l = n - 1; l-- > 0;) {
        s.value[l] = activation_apply(net.activation, matmul(net.theta[l], s.value[l + 1]));
    }
    for (std::size_t l = 0; l < n; ++l) s.precision[l] = Tensor::full(s.value[l].shape(), 1.0);
    pc_refresh(net, s, true);
    return s;
}

inline void pc_clamp_bottom(const HierarchicalPCNet& net, PCState& s, const Tensor& target) {
    if (target.rows() != net.sizes[0]) {
        throw std::invalid_argument("pc_clamp_bottom: target rows do not match the bottom layer");
    }
    s.value[0] = target;
    s.clamped[0] = true;
    pc_refresh(net, s, false);
}

// Free energy: precision-weighted squared prediction error summed over
// layers (and batch columns).
inline double vfe(const PCState& s) {
    double f = 0.0;
    for (std::size_t l = 0; l + 1 < s.value.size(); ++l) {
        f += dot(s.signal[l] - s.prediction[l], s.error[l]);
    }
    return f;
}

// One synchronous Euler step on all unclamped layers:
//   d mu_l = -eps_l + theta[l-1]^T (f'(pre[l-1]) . eps_{l-1})
// with theta^T replaced by the backward weights and f' by one under the
// corresponding relaxations. Returns the largest |d mu| before scaling.
inline double pc_infer_step(const HierarchicalPCNet& net, PCState& s, const PCConfig& cfg) {
    const std::size_t n = net.layers();
    std::vector<Tensor> du(n);
    double residual = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        if (s.clamped[l]) continue;
        Tensor d = -1.0 * s.error[l];
        if (l > 0) {
            Tensor g = s.error[l - 1];
            if (!cfg.drop_nonlinear_derivs) {
                g = hadamard(activation_deriv(net.activation, s.pre[l - 1]), g);
            }
            d += net.has_backward() ? matmul(net.tilde[l - 1], g)
                                    : matmul(transpose(net.theta[l - 1]), g);
        }
        residual = std::max(residual, max_abs(d));
        du[l] = std::move(d);
    }
    for (std::size_t l = 0; l < n; ++l) {
        if (!s.clamped[l]) s.value[l] += cfg.inference_rate * du[l];
    }
    pc_refresh(net, s, false);
    return residual;
}

// Relax until the update norm falls under convergence_tol or the iteration
// budget runs out. Returns the number of steps taken.
inline std::size_t pc_infer(const HierarchicalPCNet& net, PCState& s, const PCConfig& cfg) {
    for (std::size_t it = 0; it < cfg.inference_iters; ++it) {
        if (pc_infer_step(net, s, cfg) < cfg.convergence_tol) return it + 1;
    }
    return cfg.inference_iters;
}

// Hebbian weight updates from the relaxed state, averaged over batch columns:
//   d theta[l] = (f'(pre) . eps_l) mu_{l+1}^T
//   d tilde[l] = mu_{l+1} (f'(pre) . eps_l)^T
//   d psi[l]   = -eps_l mu_l^T
inline void pc_weight_step(HierarchicalPCNet& net, const PCState& s, const PCConfig& cfg) {
    const double batch = static_cast<double>(s.value[0].rank() == 2 ? s.value[0].cols() : 1);
    const double rate = cfg.weight_rate / batch;
    for (std::size_t l = 0; l + 1 < net.layers(); ++l) {
        Tensor g = s.error[l];
        if (!cfg.drop_nonlinear_derivs) {
            g = hadamard(activation_deriv(net.activation, s.pre[l]), g);
        }
        net.theta[l] += rate * matmul(g, transpose(s.value[l + 1]));
        if (cfg.learnable_backward_weights && net.has_backward()) {
            net.tilde[l] += rate * matmul(s.value[l + 1], transpose(g));
        }
        if (cfg.error_connection_weights && net.has_error_weights()) {
            net.psi[l] += -rate * matmul(s.error[l], transpose(s.value[l]));
        }
    }
}

// Plain feedforward sweep; values[l] is the top-down prediction cascade with
// the data clamped on top. values[0] is the network output.
inline std::vector<Tensor> pc_forward(const HierarchicalPCNet& net, const Tensor& top_input) {
    std::vector<Tensor> values(net.layers());
    values[net.layers() - 1] = top_input;
    for (std::size_t l = net.layers() - 1; l-- > 0;) {
        values[l] = activation_apply(net.activation, matmul(net.theta[l], values[l + 1]));
    }
    return values;
}

// Supervised relaxation: clamp data on top and the target at the bottom,
// start from the feedforward sweep, and relax the hidden layers.
inline PCState pc_supervised_infer(const HierarchicalPCNet& net, const Tensor& input,
                                   const Tensor& target, const PCConfig& cfg) {
    PCState s = pc_make_state(net, input);
    pc_clamp_bottom(net, s, target);
    pc_infer(net, s, cfg);
    return s;
}

}  // namespace freegrad
