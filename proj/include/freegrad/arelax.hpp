// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Activation relaxation: after a forward pass, the activations themselves
// relax to the loss adjoints of their layers under a leaky integrator driven
// by the layer above. The frozen forward activations supply the nonlinear
// derivative gates and the weight-update activity. Relaxed variants swap the
// weight transpose for learned backward weights, drop the derivative gates,
// or unfreeze pieces of the forward pass (one of which is known to break
// learning and is kept for that demonstration).

#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "freegrad/activation.hpp"
#include "freegrad/random.hpp"
#include "freegrad/tensor.hpp"

namespace freegrad {

// weights[l] maps layer l to the pre-activation of layer l+1; psi[l] carries
// the relaxation flow back from layer l+1 and has the transpose shape. xbar
// holds the forward activations and stays untouched during relaxation.
struct ARNet {
    std::vector<std::size_t> sizes;
    std::vector<Tensor> weights;
    std::vector<Tensor> psi;
    ActivationKind activation = ActivationKind::relu;
    std::vector<Tensor> xbar;

    std::size_t maps() const { return weights.size(); }
    bool has_backward() const { return !psi.empty(); }
};

struct ARConfig {
    double relax_rate = 0.1;
    std::size_t relax_iters = 100;
    double weight_rate = 0.0005;
    double convergence_tol = 1e-7;
    bool learnable_backward_weights = false;
    bool drop_nonlinear_derivs = false;
    bool unfreeze_relax_deriv = false;
    bool unfreeze_weight_deriv = false;
    bool unfreeze_weight_activity = false;
};

// Negative variance selects the fan-in scaled default.
inline ARNet make_ar_net(std::vector<std::size_t> sizes, ActivationKind activation, RngSeed seed,
                         double variance = -1.0) {
    if (sizes.size() < 2) throw std::invalid_argument("make_ar_net needs >= 2 layers");
    ARNet net;
    net.sizes = std::move(sizes);
    net.activation = activation;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
        const double var = variance > 0.0 ? variance : 1.0 / static_cast<double>(net.sizes[l]);
        net.weights.push_back(gaussian_tensor(rng, {net.sizes[l + 1], net.sizes[l]}, 0.0, var));
    }
    return net;
}

inline void enable_ar_backward_weights(ARNet& net, bool init_transpose, RngSeed seed) {
    net.psi.clear();
    Rng rng(seed);
    for (const Tensor& w : net.weights) {
        net.psi.push_back(init_transpose ? transpose(w)
                                         : gaussian_tensor(rng, {w.cols(), w.rows()}, 0.0, 0.05));
    }
}

// The output map is linear; every earlier map applies the activation.
inline ActivationKind ar_map_activation(const ARNet& net, std::size_t l) {
    return l + 1 == net.maps() ? ActivationKind::identity : net.activation;
}

// Forward pass x_{l+1} = f(W_l x_l), stored as the frozen activations.
inline const std::vector<Tensor>& ar_forward(ARNet& net, const Tensor& input) {
    if (input.rows() != net.sizes[0]) {
        throw std::invalid_argument("ar_forward: input rows do not match the first layer");
    }
    net.xbar.assign(1, input);
    for (std::size_t l = 0; l < net.maps(); ++l) {
        net.xbar.push_back(
            activation_apply(ar_map_activation(net, l), matmul(net.weights[l], net.xbar[l])));
    }
    return net.xbar;
}

inline Tensor ar_output_error(const ARNet& net, const Tensor& target) {
    if (net.xbar.empty()) throw std::logic_error("ar_output_error: run ar_forward first");
    return net.xbar.back() - target;
}

namespace detail {

inline Tensor ar_gate(const ARNet& net, std::size_t l, const Tensor& at) {
    return activation_deriv(ar_map_activation(net, l), matmul(net.weights[l], at));
}

[[noreturn]] inline void ar_diverged(const char* where, std::size_t layer, std::size_t iter,
                                     double n) {
    std::ostringstream msg;
    msg << where << ": activations diverged at layer " << layer << ", iteration " << iter
        << " (norm " << n << " > 1e6); lower the rate or rescale the backward weights";
    throw std::runtime_error(msg.str());
}

}  // namespace detail

// Relax the activations toward the layer adjoints with the top layer clamped
// to the loss gradient:
//   d x_l = -x_l + W_l^T (f'(W_l xbar_l) . x_{l+1})
// Backward weights replace W^T and the gate drops out under the relaxed
// variants; unfreeze_relax_deriv evaluates the gate at the moving activity.
inline std::vector<Tensor> ar_relax(const ARNet& net, const ARConfig& cfg,
                                    const Tensor& output_error) {
    if (net.xbar.size() != net.sizes.size()) {
        throw std::logic_error("ar_relax: run ar_forward first");
    }
    if (output_error.shape() != net.xbar.back().shape()) {
        throw std::invalid_argument("ar_relax: output error shape mismatch");
    }
    std::vector<Tensor> x = net.xbar;
    x.back() = output_error;

    std::vector<Tensor> frozen_gate;
    if (!cfg.drop_nonlinear_derivs && !cfg.unfreeze_relax_deriv) {
        for (std::size_t l = 0; l < net.maps(); ++l) {
            frozen_gate.push_back(detail::ar_gate(net, l, net.xbar[l]));
        }
    }
    for (std::size_t iter = 0; iter < cfg.relax_iters; ++iter) {
        std::vector<Tensor> dx(net.maps());
        double residual = 0.0;
        for (std::size_t l = 0; l < net.maps(); ++l) {
            Tensor back = x[l + 1];
            if (!cfg.drop_nonlinear_derivs) {
                back = hadamard(cfg.unfreeze_relax_deriv ? detail::ar_gate(net, l, x[l])
                                                         : frozen_gate[l],
                                back);
            }
            Tensor d = cfg.learnable_backward_weights ? matmul(net.psi[l], back)
                                                      : matmul(transpose(net.weights[l]), back);
            d -= x[l];
            residual = std::max(residual, max_abs(d));
            dx[l] = std::move(d);
        }
        for (std::size_t l = 0; l < net.maps(); ++l) {
            x[l] += cfg.relax_rate * dx[l];
            if (norm(x[l]) > 1e6) detail::ar_diverged("ar_relax", l, iter, norm(x[l]));
        }
        if (residual < cfg.convergence_tol) break;
    }
    return x;
}

// Stability fallback: relax one layer at a time from the top down, each to
// tolerance. Every sub-relaxation sees a constant drive, so it contracts at
// the leak rate and always converges; the parallel scheme shares its fixed
// point.
inline std::vector<Tensor> ar_relax_sequential(const ARNet& net, const ARConfig& cfg,
                                               const Tensor& output_error) {
    if (net.xbar.size() != net.sizes.size()) {
        throw std::logic_error("ar_relax_sequential: run ar_forward first");
    }
    std::vector<Tensor> x = net.xbar;
    x.back() = output_error;
    for (std::size_t l = net.maps(); l-- > 0;) {
        Tensor back = x[l + 1];
        if (!cfg.drop_nonlinear_derivs) back = hadamard(detail::ar_gate(net, l, net.xbar[l]), back);
        const Tensor drive = cfg.learnable_backward_weights
                                 ? matmul(net.psi[l], back)
                                 : matmul(transpose(net.weights[l]), back);
        for (std::size_t iter = 0; iter < cfg.relax_iters; ++iter) {
            const Tensor d = drive - x[l];
            x[l] += cfg.relax_rate * d;
            if (norm(x[l]) > 1e6) detail::ar_diverged("ar_relax_sequential", l, iter, norm(x[l]));
            if (max_abs(d) < cfg.convergence_tol) break;
        }
    }
    return x;
}

// Loss gradients with respect to the weights, from relaxed activations:
//   dL/dW_l = (f'(W_l xbar_l) . x_{l+1}) xbar_l^T
// summed over batch columns. The unfreeze flags substitute the moving
// activity for the frozen pass in the gate or the activity term.
inline std::vector<Tensor> ar_weight_gradients(const ARNet& net, const std::vector<Tensor>& x,
                                               const ARConfig& cfg) {
    if (x.size() != net.sizes.size()) {
        throw std::invalid_argument("ar_weight_gradients: wrong activation count");
    }
    std::vector<Tensor> grads;
    for (std::size_t l = 0; l < net.maps(); ++l) {
        Tensor upstream = x[l + 1];
        if (!cfg.drop_nonlinear_derivs) {
            const Tensor& at = cfg.unfreeze_weight_deriv ? x[l] : net.xbar[l];
            upstream = hadamard(detail::ar_gate(net, l, at), upstream);
        }
        const Tensor& activity = cfg.unfreeze_weight_activity ? x[l] : net.xbar[l];
        grads.push_back(matmul(upstream, transpose(activity)));
    }
    return grads;
}

inline void ar_weight_update(ARNet& net, const std::vector<Tensor>& x, const ARConfig& cfg) {
    const std::vector<Tensor> grads = ar_weight_gradients(net, x, cfg);
    const double batch = static_cast<double>(x[0].rank() == 2 ? x[0].cols() : 1);
    for (std::size_t l = 0; l < net.maps(); ++l) {
        net.weights[l] -= (cfg.weight_rate / batch) * grads[l];
    }
}

// Backward-weight learning: each psi receives the transpose of the descent
// step its forward partner would take, so psi tracks W^T as training moves
// the weights and exact-transpose initialization is preserved.
inline void ar_backward_weight_update(ARNet& net, const std::vector<Tensor>& x,
                                      const ARConfig& cfg) {
    if (!net.has_backward()) {
        throw std::logic_error("ar_backward_weight_update: backward weights not enabled");
    }
    const double batch = static_cast<double>(x[0].rank() == 2 ? x[0].cols() : 1);
    for (std::size_t l = 0; l < net.maps(); ++l) {
        Tensor back = x[l + 1];
        if (!cfg.drop_nonlinear_derivs) back = hadamard(detail::ar_gate(net, l, net.xbar[l]), back);
        net.psi[l] -= (cfg.weight_rate / batch) * matmul(net.xbar[l], transpose(back));
    }
}

// Activation-before-weights ordering: x_{l+1} = W_l f(x_l), linear output.
// The adjoint recursion then needs no weight-derivative coupling; weight
// gradients are plain products of adjoints and presynaptic activity.
inline std::vector<Tensor> three_factor_forward(const ARNet& net, const Tensor& input) {
    if (input.rows() != net.sizes[0]) {
        throw std::invalid_argument("three_factor_forward: input rows do not match");
    }
    std::vector<Tensor> x{input};
    for (std::size_t l = 0; l < net.maps(); ++l) {
        x.push_back(matmul(net.weights[l], activation_apply(net.activation, x[l])));
    }
    return x;
}

struct ThreeFactorResult {
    std::vector<Tensor> adjoints;      // interneuron activities, one per layer
    std::vector<Tensor> weight_grads;  // dL/dW_l, batch-summed
};

// I_l = f'(x_l) . (W_l^T I_{l+1}) with the transpose swapped for psi and the
// gate dropped under the relaxed flags; dL/dW_l = I_{l+1} f(x_l)^T.
// three_factor_backward computes both; the weight updates below apply them.
inline ThreeFactorResult three_factor_backward(const ARNet& net, const std::vector<Tensor>& x,
                                               const Tensor& output_error, const ARConfig& cfg) {
    if (x.size() != net.sizes.size()) {
        throw std::invalid_argument("three_factor_backward: wrong activation count");
    }
    ThreeFactorResult r;
    r.adjoints.assign(x.size(), Tensor());
    r.weight_grads.assign(net.maps(), Tensor());
    r.adjoints.back() = output_error;
    for (std::size_t l = net.maps(); l-- > 0;) {
        Tensor down = cfg.learnable_backward_weights
                          ? matmul(net.psi[l], r.adjoints[l + 1])
                          : matmul(transpose(net.weights[l]), r.adjoints[l + 1]);
        if (!cfg.drop_nonlinear_derivs) {
            down = hadamard(activation_deriv(net.activation, x[l]), down);
        }
        r.adjoints[l] = std::move(down);
        r.weight_grads[l] =
            matmul(r.adjoints[l + 1], transpose(activation_apply(net.activation, x[l])));
    }
    return r;
}

inline void three_factor_weight_update(ARNet& net, const ThreeFactorResult& r,
                                       const ARConfig& cfg) {
    const double batch =
        static_cast<double>(r.adjoints[0].rank() == 2 ? r.adjoints[0].cols() : 1);
    for (std::size_t l = 0; l < net.maps(); ++l) {
        net.weights[l] -= (cfg.weight_rate / batch) * r.weight_grads[l];
    }
}

// Presynaptic activity times the descending adjoint: the transpose of the
// forward weight step, so psi tracks W^T here as well.
inline void three_factor_backward_weight_update(ARNet& net, const std::vector<Tensor>& x,
                                                const ThreeFactorResult& r, const ARConfig& cfg) {
    if (!net.has_backward()) {
        throw std::logic_error("three_factor_backward_weight_update: backward weights missing");
    }
    const double batch =
        static_cast<double>(r.adjoints[0].rank() == 2 ? r.adjoints[0].cols() : 1);
    for (std::size_t l = 0; l < net.maps(); ++l) {
        net.psi[l] -= (cfg.weight_rate / batch) *
                      matmul(activation_apply(net.activation, x[l]), transpose(r.adjoints[l + 1]));
    }
}

}  // namespace freegrad
