// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// One-dimensional Gaussian mixtures and the two ways of fitting one to a
// desired density: minimizing the divergence of the fit from the target, or
// maximizing the expected log target under the fit. The first matches the
// target; the second concentrates all mass where the target is largest, which
// is the behavior the objective family predicts. Integrals are evaluated on a
// fixed quadrature grid so both the optimizer and the checks share one
// definition of the objective.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "freegrad/objectives.hpp"

namespace freegrad {

struct GaussianComponent {
    double weight = 1.0;
    double mean = 0.0;
    double variance = 1.0;
};

struct GaussianMixture {
    std::vector<GaussianComponent> components;
};

inline void validate_mixture(const GaussianMixture& m) {
    if (m.components.empty()) throw std::invalid_argument("mixture has no components");
    double sum = 0.0;
    for (const GaussianComponent& c : m.components) {
        if (c.weight < 0.0) throw std::invalid_argument("mixture weight negative");
        if (c.variance <= 0.0) throw std::invalid_argument("mixture variance not positive");
        sum += c.weight;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("mixture weights do not sum to 1");
}

inline double gaussian_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

inline double mixture_pdf(const GaussianMixture& m, double x) {
    double acc = 0.0;
    for (const GaussianComponent& c : m.components) {
        acc += c.weight * gaussian_pdf(x, c.mean, c.variance);
    }
    return acc;
}

enum class FitMode { evidence, divergence };

// The quadrature grid every mixture integral uses.
struct MixtureGrid {
    double lo = -10.0;
    double hi = 15.0;
    std::size_t points = 4000;

    double dx() const { return (hi - lo) / static_cast<double>(points - 1); }
    double x(std::size_t i) const { return lo + static_cast<double>(i) * dx(); }
};

// Divergence of the fit from the target on the grid:
// sum fit(x) (ln fit(x) - ln target(x)) dx.
inline double mixture_divergence(const GaussianMixture& fit, const GaussianMixture& target,
                                 const MixtureGrid& grid = {}) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.points; ++i) {
        const double f = mixture_pdf(fit, grid.x(i));
        if (f <= 0.0) continue;
        const double t = mixture_pdf(target, grid.x(i));
        acc += f * (detail::floored_log(f) - detail::floored_log(t));
    }
    return acc * grid.dx();
}

// Expected log target under the fit on the grid: sum fit(x) ln target(x) dx.
inline double mixture_evidence(const GaussianMixture& fit, const GaussianMixture& target,
                               const MixtureGrid& grid = {}) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.points; ++i) {
        const double f = mixture_pdf(fit, grid.x(i));
        if (f <= 0.0) continue;
        acc += f * detail::floored_log(mixture_pdf(target, grid.x(i)));
    }
    return acc * grid.dx();
}

namespace detail {

inline double softplus(double s) {
    if (s > 30.0) return s;
    if (s < -30.0) return std::exp(s);
    return std::log1p(std::exp(s));
}

inline double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// Inverse of softplus for initialization.
inline double softplus_inverse(double v) { return std::log(std::expm1(v)); }

}  // namespace detail

// Fits a mixture to the target density by sign-based gradient descent with
// per-coordinate adaptive step sizes. Weights go through a softmax and
// variances through a softplus with a floor of (2 dx)^2, so the parameter
// vector is unconstrained; the per-coordinate steps matter because the
// saturating weight and variance coordinates carry exponentially small
// gradients next to the stiff mean coordinates. Means start at evenly spaced
// quantiles of the target so a component lands in each probable region.
// Divergence mode minimizes mixture_divergence; evidence mode minimizes the
// negated mixture_evidence, which drives the variances to the floor and the
// mass onto the target's largest mode. Converged means a vanishing gradient,
// parameters at numerical rest, or a long stretch without improvement; the
// best parameters seen are returned. Throws when the budget runs out while
// the fit is still improving, reporting the final objective.
inline GaussianMixture fit_mixture(const GaussianMixture& target, std::size_t n_components,
                                   FitMode mode, std::size_t budget = 40000) {
    validate_mixture(target);
    if (n_components < 1) throw std::invalid_argument("n_components must be at least 1");
    const MixtureGrid grid;
    const double dx = grid.dx();
    const double var_floor = 4.0 * dx * dx;
    const std::size_t k = n_components;

    std::vector<double> target_log(grid.points);
    for (std::size_t i = 0; i < grid.points; ++i) {
        target_log[i] = detail::floored_log(mixture_pdf(target, grid.x(i)));
    }

    // Parameters: k weight logits, k means, k variance pre-activations.
    std::vector<double> params(3 * k, 0.0);
    {
        // Means at target quantiles (j + 1/2) / k via the grid CDF.
        double cum = 0.0;
        std::size_t j = 0;
        for (std::size_t i = 0; i < grid.points && j < k; ++i) {
            cum += std::exp(target_log[i]) * dx;
            while (j < k && cum >= (static_cast<double>(j) + 0.5) / static_cast<double>(k)) {
                params[k + j] = grid.x(i);
                ++j;
            }
        }
        for (; j < k; ++j) params[k + j] = grid.x(grid.points - 1);
        for (std::size_t c = 0; c < k; ++c) {
            params[2 * k + c] = detail::softplus_inverse(1.0 - var_floor);
        }
    }

    const auto unpack = [&](const std::vector<double>& p) {
        GaussianMixture m;
        m.components.resize(k);
        double norm = 0.0;
        double top = p[0];
        for (std::size_t c = 1; c < k; ++c) top = std::max(top, p[c]);
        for (std::size_t c = 0; c < k; ++c) {
            m.components[c].weight = std::exp(p[c] - top);
            norm += m.components[c].weight;
        }
        for (std::size_t c = 0; c < k; ++c) {
            m.components[c].weight /= norm;
            m.components[c].mean = p[k + c];
            m.components[c].variance = var_floor + detail::softplus(p[2 * k + c]);
        }
        return m;
    };

    const auto objective = [&](const GaussianMixture& m) {
        double acc = 0.0;
        for (std::size_t i = 0; i < grid.points; ++i) {
            const double f = mixture_pdf(m, grid.x(i));
            if (f <= 0.0) continue;
            if (mode == FitMode::divergence) {
                acc += f * (detail::floored_log(f) - target_log[i]);
            } else {
                acc -= f * target_log[i];
            }
        }
        return acc * dx;
    };

    // d objective / d fit(x) on the grid, then chain rule into the
    // parameters: d fit / d logit_c = w_c (N_c - fit), d fit / d mean_c =
    // w_c N_c (x - mean) / v, d fit / d pre_c = w_c N_c ((x - mean)^2 / v - 1)
    // / (2 v) * sigmoid(pre).
    const auto gradient = [&](const std::vector<double>& p, const GaussianMixture& m,
                              std::vector<double>& g) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < grid.points; ++i) {
            const double x = grid.x(i);
            const double f = mixture_pdf(m, x);
            double dobj;
            if (mode == FitMode::divergence) {
                dobj = detail::floored_log(f) - target_log[i] + 1.0;
            } else {
                dobj = -target_log[i];
            }
            for (std::size_t c = 0; c < k; ++c) {
                const GaussianComponent& gc = m.components[c];
                const double n = gaussian_pdf(x, gc.mean, gc.variance);
                const double d = x - gc.mean;
                g[c] += dobj * gc.weight * (n - f);
                g[k + c] += dobj * gc.weight * n * d / gc.variance;
                g[2 * k + c] += dobj * gc.weight * n * (d * d / gc.variance - 1.0) /
                                (2.0 * gc.variance) * detail::sigmoid(p[2 * k + c]);
            }
        }
        for (double& v : g) v *= dx;
    };

    std::vector<double> g(3 * k), prev_g(3 * k, 0.0), delta(3 * k, 0.1);
    std::vector<double> best_params = params;
    double best_obj = objective(unpack(params));
    std::size_t stale = 0;
    for (std::size_t iter = 0; iter < budget; ++iter) {
        const GaussianMixture m = unpack(params);
        gradient(params, m, g);
        double gmax = 0.0, dmax = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            gmax = std::max(gmax, std::abs(g[i]));
            const double agree = g[i] * prev_g[i];
            if (agree > 0.0) {
                delta[i] = std::min(delta[i] * 1.2, 5.0);
            } else if (agree < 0.0) {
                // Overshot this coordinate: shrink its step and sit one
                // iteration out.
                delta[i] = std::max(delta[i] * 0.5, 1e-14);
                g[i] = 0.0;
            }
            if (g[i] > 0.0) params[i] -= delta[i];
            if (g[i] < 0.0) params[i] += delta[i];
            prev_g[i] = g[i];
            dmax = std::max(dmax, delta[i]);
        }
        const double obj = objective(unpack(params));
        if (obj < best_obj - 1e-11 * (1.0 + std::abs(best_obj))) {
            best_obj = obj;
            best_params = params;
            stale = 0;
        } else {
            if (obj < best_obj) {
                best_obj = obj;
                best_params = params;
            }
            ++stale;
        }
        if (gmax < 1e-10 || dmax < 1e-13 || stale >= 300) return unpack(best_params);
    }
    std::ostringstream out;
    out << "mixture fit did not converge within " << budget
        << " iterations; final objective " << best_obj;
    throw std::runtime_error(out.str());
}

}  // namespace freegrad
