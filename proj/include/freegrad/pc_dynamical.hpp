// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Predictive coding over time. Beliefs carry their own temporal derivatives
// as generalized coordinates: mu[k] is the k-th derivative belief, a shift
// operator maps each order to the next, and the tracking dynamics add the
// shift flow to the usual error-driven descent. A lattice variant couples a
// dynamical hierarchy (order predicts the order below, same level) with a
// spatial hierarchy (level predicts the level below, same order).

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "freegrad/activation.hpp"
#include "freegrad/numeric.hpp"
#include "freegrad/pc_hierarchical.hpp"
#include "freegrad/tensor.hpp"

namespace freegrad {

// Beliefs in generalized coordinates plus the linear generative pieces:
// theta[k] predicts order k+1 from order k, obs_map predicts the observation
// at every order. Precisions are scalar per error family and order; cross-
// order couplings are not represented.
struct GenCoordState {
    std::vector<Tensor> mu;
    std::vector<Tensor> theta;
    Tensor obs_map;
    std::vector<double> precision_x;
    std::vector<double> precision_o;

    std::size_t orders() const { return mu.size(); }
    std::size_t dim() const { return mu.empty() ? 0 : mu[0].size(); }
};

// All transition weights start as copies of `dynamics`; beliefs start at zero.
inline GenCoordState make_gencoord_state(const Tensor& dynamics, const Tensor& obs_map,
                                         std::size_t orders) {
    if (orders == 0) throw std::invalid_argument("make_gencoord_state: need >= 1 order");
    if (dynamics.rows() != dynamics.cols()) {
        throw std::invalid_argument("make_gencoord_state: dynamics must be square");
    }
    if (obs_map.cols() != dynamics.rows()) {
        throw std::invalid_argument("make_gencoord_state: observation map width mismatch");
    }
    GenCoordState s;
    s.obs_map = obs_map;
    for (std::size_t k = 0; k < orders; ++k) s.mu.emplace_back(Shape{dynamics.rows()});
    for (std::size_t k = 0; k + 1 < orders; ++k) s.theta.push_back(dynamics);
    s.precision_x.assign(orders > 0 ? orders - 1 : 0, 1.0);
    s.precision_o.assign(orders, 1.0);
    return s;
}

inline Tensor gencoord_dynamics_error(const GenCoordState& s, std::size_t k) {
    return s.mu[k + 1] - matmul(s.theta[k], s.mu[k]);
}

inline Tensor gencoord_obs_error(const GenCoordState& s, const std::vector<Tensor>& obs,
                                 std::size_t k) {
    return obs[k] - matmul(s.obs_map, s.mu[k]);
}

// Precision-weighted squared error across both families, for the orders the
// observation actually supplies.
inline double gencoord_vfe(const GenCoordState& s, const std::vector<Tensor>& obs) {
    double f = 0.0;
    for (std::size_t k = 0; k + 1 < s.orders(); ++k) {
        f += s.precision_x[k] * squared_norm(gencoord_dynamics_error(s, k));
    }
    for (std::size_t k = 0; k < obs.size(); ++k) {
        f += s.precision_o[k] * squared_norm(gencoord_obs_error(s, obs, k));
    }
    return f;
}

// One Euler step of the tracking dynamics,
//   d mu[k] = mu[k+1]                                 (shift flow, zero at top)
//           + C^T prec_o eps_o[k]                     (observation pull)
//           - prec_x eps_x[k-1]                       (being predicted from below)
//           + theta[k]^T prec_x eps_x[k]              (predicting the order above)
// applied simultaneously at rate cfg.inference_rate. Observations may cover
// fewer orders than the state; extra orders are simply unobserved.
inline double dynamical_pc_step(GenCoordState& s, const std::vector<Tensor>& obs,
                                const PCConfig& cfg) {
    const std::size_t n = s.orders();
    if (obs.size() > n) throw std::invalid_argument("dynamical_pc_step: more orders than beliefs");
    for (std::size_t k = 0; k < obs.size(); ++k) {
        if (obs[k].size() != s.obs_map.rows()) {
            throw std::invalid_argument("dynamical_pc_step: observation dimension mismatch");
        }
    }
    std::vector<Tensor> eps_x;
    for (std::size_t k = 0; k + 1 < n; ++k) eps_x.push_back(gencoord_dynamics_error(s, k));

    std::vector<Tensor> d(n);
    double residual = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        Tensor dk(s.mu[k].shape());
        if (k + 1 < n) dk += s.mu[k + 1];
        if (k < obs.size()) {
            dk += matmul(transpose(s.obs_map), s.precision_o[k] * gencoord_obs_error(s, obs, k));
        }
        if (k > 0) dk -= s.precision_x[k - 1] * eps_x[k - 1];
        if (k + 1 < n) dk += matmul(transpose(s.theta[k]), s.precision_x[k] * eps_x[k]);
        residual = std::max(residual, max_abs(dk));
        d[k] = std::move(dk);
    }
    for (std::size_t k = 0; k < n; ++k) s.mu[k] += cfg.inference_rate * d[k];
    return residual;
}

// Hebbian update of the transition weights from the current dynamics errors.
inline void dynamical_pc_weight_step(GenCoordState& s, const PCConfig& cfg) {
    for (std::size_t k = 0; k + 1 < s.orders(); ++k) {
        const Tensor eps = gencoord_dynamics_error(s, k);
        s.theta[k] += (cfg.weight_rate * s.precision_x[k]) * matmul(eps, transpose(s.mu[k]));
    }
}

// Lattice of (level, order) nodes. Level 0 is the observation row; each node
// is predicted jointly by the next order at its level (through f) and the
// next level at its order (through g). Nodes missing both predictors carry
// no error.
struct FullConstructModel {
    std::vector<std::size_t> dims;  // per level
    std::size_t orders = 1;
    std::vector<std::vector<Tensor>> f_w;  // f_w[i][n]: dims[i] x dims[i], n+1 < orders
    std::vector<std::vector<Tensor>> g_w;  // g_w[i][n]: dims[i] x dims[i+1], i+1 < levels
    ActivationKind f_act = ActivationKind::identity;
    ActivationKind g_act = ActivationKind::identity;

    std::size_t levels() const { return dims.size(); }
};

inline FullConstructModel make_full_construct(std::vector<std::size_t> dims, std::size_t orders,
                                              ActivationKind f_act, ActivationKind g_act,
                                              RngSeed seed) {
    if (dims.empty() || orders == 0) {
        throw std::invalid_argument("make_full_construct: need >= 1 level and order");
    }
    FullConstructModel m;
    m.dims = std::move(dims);
    m.orders = orders;
    m.f_act = f_act;
    m.g_act = g_act;
    Rng rng(seed);
    m.f_w.resize(m.levels());
    m.g_w.resize(m.levels());
    for (std::size_t i = 0; i < m.levels(); ++i) {
        for (std::size_t n = 0; n + 1 < orders; ++n) {
            m.f_w[i].push_back(
                gaussian_tensor(rng, {m.dims[i], m.dims[i]}, 0.0, 1.0 / m.dims[i]));
        }
        if (i + 1 < m.levels()) {
            for (std::size_t n = 0; n < orders; ++n) {
                m.g_w[i].push_back(
                    gaussian_tensor(rng, {m.dims[i], m.dims[i + 1]}, 0.0, 1.0 / m.dims[i + 1]));
            }
        }
    }
    return m;
}

struct FullConstructState {
    std::vector<std::vector<Tensor>> mu;          // [level][order]
    std::vector<std::vector<Tensor>> pre_f;       // f_w * mu[i][n+1]
    std::vector<std::vector<Tensor>> pre_g;       // g_w * mu[i+1][n]
    std::vector<std::vector<Tensor>> prediction;  // sum of available parts
    std::vector<std::vector<Tensor>> error;
    std::vector<std::vector<double>> precision;
    std::vector<std::vector<bool>> clamped;       // level 0 row is typically clamped
};

inline bool full_construct_has_error(const FullConstructModel& m, std::size_t i, std::size_t n) {
    return n + 1 < m.orders || i + 1 < m.levels();
}

inline void full_construct_refresh(const FullConstructModel& m, FullConstructState& s) {
    for (std::size_t i = 0; i < m.levels(); ++i) {
        for (std::size_t n = 0; n < m.orders; ++n) {
            Tensor pred(s.mu[i][n].shape());
            if (n + 1 < m.orders) {
                s.pre_f[i][n] = matmul(m.f_w[i][n], s.mu[i][n + 1]);
                pred += activation_apply(m.f_act, s.pre_f[i][n]);
            }
            if (i + 1 < m.levels()) {
                s.pre_g[i][n] = matmul(m.g_w[i][n], s.mu[i + 1][n]);
                pred += activation_apply(m.g_act, s.pre_g[i][n]);
            }
            s.prediction[i][n] = std::move(pred);
            s.error[i][n] = full_construct_has_error(m, i, n)
                                ? s.precision[i][n] * (s.mu[i][n] - s.prediction[i][n])
                                : Tensor(s.mu[i][n].shape());
        }
    }
}

inline FullConstructState make_full_construct_state(const FullConstructModel& m) {
    FullConstructState s;
    const auto grid = [&](auto init) {
        std::vector<std::vector<decltype(init(0))>> g(m.levels());
        for (std::size_t i = 0; i < m.levels(); ++i) {
            for (std::size_t n = 0; n < m.orders; ++n) g[i].push_back(init(i));
        }
        return g;
    };
    s.mu = grid([&](std::size_t i) { return Tensor(Shape{m.dims[i]}); });
    s.pre_f = s.mu;
    s.pre_g = s.mu;
    s.prediction = s.mu;
    s.error = s.mu;
    s.precision.assign(m.levels(), std::vector<double>(m.orders, 1.0));
    s.clamped.assign(m.levels(), std::vector<bool>(m.orders, false));
    full_construct_refresh(m, s);
    return s;
}

// Synchronous descent on the lattice free energy: each free node feels its
// own error plus the errors of the two nodes it helps predict, pulled back
// through the respective weights.
inline double full_construct_step(const FullConstructModel& m, FullConstructState& s,
                                  const PCConfig& cfg) {
    std::vector<std::vector<Tensor>> d(m.levels());
    double residual = 0.0;
    for (std::size_t i = 0; i < m.levels(); ++i) {
        for (std::size_t n = 0; n < m.orders; ++n) {
            Tensor dn = -1.0 * s.error[i][n];
            if (n > 0) {
                const Tensor gated =
                    hadamard(activation_deriv(m.f_act, s.pre_f[i][n - 1]), s.error[i][n - 1]);
                dn += matmul(transpose(m.f_w[i][n - 1]), gated);
            }
            if (i > 0) {
                const Tensor gated =
                    hadamard(activation_deriv(m.g_act, s.pre_g[i - 1][n]), s.error[i - 1][n]);
                dn += matmul(transpose(m.g_w[i - 1][n]), gated);
            }
            if (!s.clamped[i][n]) residual = std::max(residual, max_abs(dn));
            d[i].push_back(std::move(dn));
        }
    }
    for (std::size_t i = 0; i < m.levels(); ++i) {
        for (std::size_t n = 0; n < m.orders; ++n) {
            if (!s.clamped[i][n]) s.mu[i][n] += cfg.inference_rate * d[i][n];
        }
    }
    full_construct_refresh(m, s);
    return residual;
}

inline void full_construct_weight_step(FullConstructModel& m, const FullConstructState& s,
                                       const PCConfig& cfg) {
    for (std::size_t i = 0; i < m.levels(); ++i) {
        for (std::size_t n = 0; n < m.orders; ++n) {
            if (!full_construct_has_error(m, i, n)) continue;
            if (n + 1 < m.orders) {
                const Tensor gated =
                    hadamard(activation_deriv(m.f_act, s.pre_f[i][n]), s.error[i][n]);
                m.f_w[i][n] += cfg.weight_rate * matmul(gated, transpose(s.mu[i][n + 1]));
            }
            if (i + 1 < m.levels()) {
                const Tensor gated =
                    hadamard(activation_deriv(m.g_act, s.pre_g[i][n]), s.error[i][n]);
                m.g_w[i][n] += cfg.weight_rate * matmul(gated, transpose(s.mu[i + 1][n]));
            }
        }
    }
}

inline double full_construct_vfe(const FullConstructState& s) {
    double f = 0.0;
    for (std::size_t i = 0; i < s.mu.size(); ++i) {
        for (std::size_t n = 0; n < s.mu[i].size(); ++n) {
            f += dot(s.mu[i][n] - s.prediction[i][n], s.error[i][n]);
        }
    }
    return f;
}

// Inverse curvature as the variance that makes the Gaussian fit optimal at
// the mode. Requires a symmetric positive definite Hessian.
inline Tensor laplace_optimal_variance(const Tensor& hessian) {
    if (hessian.rows() != hessian.cols()) {
        throw std::invalid_argument("laplace_optimal_variance: Hessian must be square");
    }
    for (std::size_t i = 0; i < hessian.rows(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (std::abs(hessian.at(i, j) - hessian.at(j, i)) > 1e-10) {
                throw std::domain_error("laplace_optimal_variance: Hessian not symmetric");
            }
        }
    }
    Tensor l;
    if (!cholesky_factor(hessian, l)) {
        throw std::domain_error("laplace_optimal_variance: Hessian not positive definite");
    }
    return matrix_inverse(hessian);
}

}  // namespace freegrad
