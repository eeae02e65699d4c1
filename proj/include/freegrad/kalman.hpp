// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Linear-Gaussian filtering two ways: the analytical Kalman recursion, and a
// gradient filter that descends the same MAP objective with precision
// weighted prediction errors. Both consume the same model; the gradient
// variant additionally learns the model matrices online from local error
// outer products. A kinematic tracking scenario generator provides the
// shared benchmark.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "freegrad/numeric.hpp"
#include "freegrad/random.hpp"
#include "freegrad/tensor.hpp"

namespace freegrad {

// x_{t+1} = dynamics x_t + control u_t + w,  o_t = obs_map x_t + z, with
// w ~ N(0, process_cov) and z ~ N(0, obs_cov).
struct LinearModel {
    Tensor dynamics;
    Tensor control;
    Tensor obs_map;
    Tensor process_cov;
    Tensor obs_cov;

    std::size_t state_dim() const { return dynamics.rows(); }
    std::size_t control_dim() const { return control.cols(); }
    std::size_t obs_dim() const { return obs_map.rows(); }
};

// Checks mutual dimension consistency and that both covariances are
// symmetric positive semidefinite.
inline void validate_linear_model(const LinearModel& m) {
    const std::size_t n = m.state_dim();
    if (m.dynamics.cols() != n) {
        throw std::invalid_argument("validate_linear_model: dynamics matrix not square");
    }
    if (m.control.rows() != n) {
        throw std::invalid_argument("validate_linear_model: control rows disagree with state");
    }
    if (m.obs_map.cols() != n) {
        throw std::invalid_argument("validate_linear_model: obs_map cols disagree with state");
    }
    const Tensor* covs[2] = {&m.process_cov, &m.obs_cov};
    const std::size_t dims[2] = {n, m.obs_dim()};
    const char* names[2] = {"process_cov", "obs_cov"};
    for (int c = 0; c < 2; ++c) {
        const Tensor& cov = *covs[c];
        if (cov.rows() != dims[c] || cov.cols() != dims[c]) {
            throw std::invalid_argument(std::string("validate_linear_model: ") + names[c] +
                                        " has wrong shape");
        }
        if (max_abs_diff(cov, transpose(cov)) > 1e-10) {
            throw std::domain_error(std::string("validate_linear_model: ") + names[c] +
                                    " not symmetric");
        }
        const std::vector<double> eig = symmetric_eigenvalues(cov);
        if (!eig.empty() && eig.front() < -1e-10) {
            throw std::domain_error(std::string("validate_linear_model: ") + names[c] +
                                    " not positive semidefinite (min eigenvalue " +
                                    std::to_string(eig.front()) + ")");
        }
    }
}

// Gaussian belief over the hidden state.
struct FilterState {
    Tensor mean;
    Tensor cov;
};

namespace detail {

inline void check_filter_dims(const FilterState& s, const LinearModel& m, const char* who) {
    if (s.mean.size() != m.state_dim()) {
        throw std::invalid_argument(std::string(who) + ": state mean size disagrees with model");
    }
    if (s.cov.rows() != m.state_dim() || s.cov.cols() != m.state_dim()) {
        throw std::invalid_argument(std::string(who) + ": state covariance shape disagrees");
    }
}

// Solve S X = B for a symmetric positive definite S. Near-singular systems
// get a small diagonal jitter; if the factorization still fails the matrix
// is genuinely bad and the error reports its eigenvalue range.
inline Tensor spd_solve(const Tensor& s, const Tensor& b, const char* context,
                        double jitter = 1e-9) {
    Tensor sym = symmetrize(s);
    Tensor l;
    if (!cholesky_factor(sym, l)) {
        for (std::size_t i = 0; i < sym.rows(); ++i) sym.at(i, i) += jitter;
        if (!cholesky_factor(sym, l)) {
            const std::vector<double> eig = symmetric_eigenvalues(sym);
            std::ostringstream msg;
            msg << context << ": matrix is singular or indefinite (eigenvalues in ["
                << eig.front() << ", " << eig.back() << "], condition ratio "
                << (eig.front() == 0.0 ? std::numeric_limits<double>::infinity()
                                       : std::abs(eig.back() / eig.front()))
                << "); the covariance inputs are not positive definite";
            throw std::runtime_error(msg.str());
        }
    }
    // Forward then back substitution against the factor, column by column.
    const std::size_t n = sym.rows();
    const std::size_t cols = b.cols();
    Tensor x = b;
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = x.at(i, j);
            for (std::size_t k = 0; k < i; ++k) v -= l.at(i, k) * x.at(k, j);
            x.at(i, j) = v / l.at(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double v = x.at(i, j);
            for (std::size_t k = i + 1; k < n; ++k) v -= l.at(k, i) * x.at(k, j);
            x.at(i, j) = v / l.at(i, i);
        }
    }
    ensure_finite(x, context);
    return x;
}

inline Tensor spd_inverse(const Tensor& s, const char* context) {
    return spd_solve(s, Tensor::identity(s.rows()), context);
}

}  // namespace detail

// Push the belief through the dynamics: mean through the deterministic part,
// covariance picking up the process noise.
inline FilterState kf_project(const FilterState& state, const LinearModel& model,
                              const Tensor& u) {
    detail::check_filter_dims(state, model, "kf_project");
    if (u.size() != model.control_dim()) {
        throw std::invalid_argument("kf_project: control size disagrees with model");
    }
    FilterState out;
    out.mean = matmul(model.dynamics, state.mean) + matmul(model.control, u);
    out.cov = symmetrize(matmul(matmul(model.dynamics, state.cov), transpose(model.dynamics)) +
                         model.process_cov);
    return out;
}

// Fold one observation into a projected belief through the gain
// K = Sigma C^T (C Sigma C^T + obs_cov)^{-1}.
inline FilterState kf_correct(const FilterState& projected, const LinearModel& model,
                              const Tensor& y) {
    detail::check_filter_dims(projected, model, "kf_correct");
    if (y.size() != model.obs_dim()) {
        throw std::invalid_argument("kf_correct: observation size disagrees with model");
    }
    const Tensor c_sigma = matmul(model.obs_map, projected.cov);
    const Tensor innovation_cov = matmul(c_sigma, transpose(model.obs_map)) + model.obs_cov;
    // K = (S^{-1} C Sigma)^T, using that S is symmetric.
    const Tensor gain =
        transpose(detail::spd_solve(innovation_cov, c_sigma, "kf_correct innovation covariance"));
    const Tensor residual = y - matmul(model.obs_map, projected.mean);
    FilterState out;
    out.mean = projected.mean + matmul(gain, residual);
    out.cov = symmetrize(matmul(Tensor::identity(model.state_dim()) - matmul(gain, model.obs_map),
                                projected.cov));
    return out;
}

// The quantity both filters optimize: precision weighted squared errors of
// the observation against its prediction and of the mean against the
// projected prior.
inline double map_objective(const LinearModel& model, const FilterState& projected,
                            const Tensor& y, const Tensor& mu) {
    const Tensor eps_z = y - matmul(model.obs_map, mu);
    const Tensor eps_x = mu - projected.mean;
    const Tensor wz = detail::spd_solve(model.obs_cov, eps_z, "map_objective obs_cov");
    const Tensor wx = detail::spd_solve(projected.cov, eps_x, "map_objective prior covariance");
    return dot(eps_z, wz) + dot(eps_x, wx);
}

struct GradFilterResult {
    FilterState state;
    // Objective value at the projected mean, then after each inner step.
    std::vector<double> inner_loss;
};

// One filtering step by gradient descent instead of gain algebra. The mean
// starts from the analytic projection and descends the MAP objective for
// inner_steps iterations; the covariance is carried analytically, as the
// inverse curvature of that objective at the optimum, since the gradient
// scheme itself only moves the mean.
inline GradFilterResult grad_filter_step(const FilterState& state, const LinearModel& model,
                                         const Tensor& y, const Tensor& u,
                                         std::size_t inner_steps = 5, double rate = 0.1) {
    if (inner_steps < 1) {
        throw std::invalid_argument("grad_filter_step: inner_steps must be at least 1");
    }
    const FilterState projected = kf_project(state, model, u);
    if (y.size() != model.obs_dim()) {
        throw std::invalid_argument("grad_filter_step: observation size disagrees with model");
    }
    const Tensor prec_z = detail::spd_inverse(model.obs_cov, "grad_filter_step obs_cov");
    const Tensor prec_x = detail::spd_inverse(projected.cov, "grad_filter_step prior covariance");

    GradFilterResult result;
    result.inner_loss.reserve(inner_steps + 1);
    Tensor mu = projected.mean;
    const auto loss = [&](const Tensor& m) {
        const Tensor ez = y - matmul(model.obs_map, m);
        const Tensor ex = m - projected.mean;
        return dot(ez, matmul(prec_z, ez)) + dot(ex, matmul(prec_x, ex));
    };
    result.inner_loss.push_back(loss(mu));
    for (std::size_t it = 0; it < inner_steps; ++it) {
        const Tensor eps_z = y - matmul(model.obs_map, mu);
        const Tensor eps_x = mu - projected.mean;
        const Tensor dmu =
            matmul(transpose(model.obs_map), matmul(prec_z, eps_z)) - matmul(prec_x, eps_x);
        mu += rate * dmu;
        if (norm(mu) > 1e6) {
            throw std::runtime_error("grad_filter_step: mean diverged at inner iteration " +
                                     std::to_string(it) + " (norm " + std::to_string(norm(mu)) +
                                     " > 1e6); lower the rate");
        }
        result.inner_loss.push_back(loss(mu));
    }
    result.state.mean = mu;
    result.state.cov = symmetrize(detail::spd_inverse(
        matmul(matmul(transpose(model.obs_map), prec_z), model.obs_map) + prec_x,
        "grad_filter_step posterior curvature"));
    return result;
}

// One filtering step's local variables, the presynaptic activity the
// learning rules need.
struct Transition {
    Tensor mu_prev;
    Tensor u;
    Tensor y;
    Tensor mu;
};

struct LearnFlags {
    bool dynamics = false;
    bool control = false;
    bool obs_map = false;
};

// Hebbian model learning: each enabled matrix moves by rate times the
// precision weighted prediction error outer the activity that produced the
// prediction. Transitions are consumed in order with the running model, so a
// length-one trajectory is one online update.
inline LinearModel learn_dynamics(LinearModel model, const std::vector<Transition>& trajectory,
                                  const LearnFlags& flags, double rate = 1e-5) {
    const Tensor prec_w = detail::spd_inverse(model.process_cov, "learn_dynamics process_cov");
    const Tensor prec_z = detail::spd_inverse(model.obs_cov, "learn_dynamics obs_cov");
    for (const Transition& t : trajectory) {
        if (t.mu_prev.size() != model.state_dim() || t.mu.size() != model.state_dim() ||
            t.u.size() != model.control_dim() || t.y.size() != model.obs_dim()) {
            throw std::invalid_argument("learn_dynamics: transition sizes disagree with model");
        }
        if (flags.dynamics || flags.control) {
            const Tensor eps_x =
                t.mu - matmul(model.dynamics, t.mu_prev) - matmul(model.control, t.u);
            const Tensor weighted = matmul(prec_w, eps_x);
            if (flags.dynamics) model.dynamics += rate * outer(weighted, t.mu_prev);
            if (flags.control) model.control += rate * outer(weighted, t.u);
        }
        if (flags.obs_map) {
            const Tensor eps_z = t.y - matmul(model.obs_map, t.mu);
            model.obs_map += rate * outer(matmul(prec_z, eps_z), t.mu);
        }
    }
    return model;
}

// Position, velocity, acceleration under Euler integration of a constant
// acceleration over one step of length dt.
inline Tensor kinematic_dynamics_matrix(double dt) {
    Tensor a = Tensor::identity(3);
    a.at(0, 1) = dt;
    a.at(0, 2) = 0.5 * dt * dt;
    a.at(1, 2) = dt;
    return a;
}

// Ground truth and measurements for the tracking benchmark. observations[t]
// is the noisy view of true_states[t + 1]; controls[t] drives that step.
struct TrackingScenario {
    double dt = 0.0;
    std::size_t horizon = 0;
    RngSeed seed = 0;
    std::vector<Tensor> controls;
    std::vector<Tensor> true_states;
    std::vector<Tensor> observations;
};

struct KinematicConfig {
    double dt = 0.01;
    std::size_t horizon = 2000;
    RngSeed seed = 0;
    std::size_t obs_dim = 2;
    double process_noise_std = 0.02;
    double observation_noise_std = 5.0;
    // u_t = amplitude * exp(-decay * t * dt): high initial thrust that dies away.
    double control_amplitude = 0.02;
    double control_decay = 1.0;
    Tensor initial_state;
};

struct KinematicSetup {
    LinearModel model;
    TrackingScenario scenario;
};

// Accelerating body with an exponentially decaying thrust, observed through
// a random linear map. The model's covariances record the true injected
// noise variances.
inline KinematicSetup make_kinematic_scenario(const KinematicConfig& cfg) {
    if (cfg.dt <= 0.0) throw std::invalid_argument("make_kinematic_scenario: dt must be positive");
    if (cfg.horizon < 1) {
        throw std::invalid_argument("make_kinematic_scenario: horizon must be at least 1");
    }
    KinematicSetup setup;
    LinearModel& m = setup.model;
    m.dynamics = kinematic_dynamics_matrix(cfg.dt);
    m.control = Tensor({3, 1});
    m.control.at(2, 0) = 1.0;
    if (cfg.obs_dim < 1) {
        throw std::invalid_argument("make_kinematic_scenario: obs_dim must be at least 1");
    }
    Rng rng(cfg.seed);
    m.obs_map = gaussian_tensor(rng, {cfg.obs_dim, 3}, 0.0, 1.0);
    m.process_cov = Tensor::identity(3) * (cfg.process_noise_std * cfg.process_noise_std);
    m.obs_cov =
        Tensor::identity(cfg.obs_dim) * (cfg.observation_noise_std * cfg.observation_noise_std);

    TrackingScenario& sc = setup.scenario;
    sc.dt = cfg.dt;
    sc.horizon = cfg.horizon;
    sc.seed = cfg.seed;
    Tensor x = cfg.initial_state.size() == 0 ? Tensor({3}) : cfg.initial_state;
    if (x.size() != 3) {
        throw std::invalid_argument("make_kinematic_scenario: initial_state must have size 3");
    }
    sc.true_states.push_back(x);
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
        Tensor u({1});
        u[0] = cfg.control_amplitude * std::exp(-cfg.control_decay * double(t) * cfg.dt);
        sc.controls.push_back(u);
        x = matmul(m.dynamics, x) + matmul(m.control, u);
        if (cfg.process_noise_std > 0.0) {
            x += gaussian_tensor(rng, {3}, 0.0, cfg.process_noise_std * cfg.process_noise_std);
        }
        sc.true_states.push_back(x);
        Tensor o = matmul(m.obs_map, x);
        if (cfg.observation_noise_std > 0.0) {
            o += gaussian_tensor(rng, {cfg.obs_dim}, 0.0,
                                 cfg.observation_noise_std * cfg.observation_noise_std);
        }
        sc.observations.push_back(o);
    }
    return setup;
}

inline KinematicSetup make_kinematic_scenario(double dt, std::size_t horizon, RngSeed seed) {
    KinematicConfig cfg;
    cfg.dt = dt;
    cfg.horizon = horizon;
    cfg.seed = seed;
    return make_kinematic_scenario(cfg);
}

}  // namespace freegrad
