// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Tabular partially observed control: Bayes-filter perception updates and
// exhaustive policy scoring over short horizons. Policies are scored by a
// per-step cost of risk (divergence of predicted observations from the
// desired observation distribution) plus ambiguity (expected entropy of the
// observation columns), then soft-maxed into a policy posterior.

#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "freegrad/objectives.hpp"
#include "freegrad/tensor.hpp"

namespace freegrad {

struct TabularPOMDP {
    Tensor likelihood;                // observation table, {O, X}, columns sum to 1
    std::vector<Tensor> transitions;  // one {X, X} column-stochastic matrix per action
    Tensor desire;                    // desired observation distribution, size O
    std::size_t horizon = 1;
    double precision = 1.0;           // softmax inverse temperature over policy scores

    std::size_t n_states() const { return likelihood.cols(); }
    std::size_t n_obs() const { return likelihood.rows(); }
    std::size_t n_actions() const { return transitions.size(); }
};

inline void validate_pomdp(const TabularPOMDP& p) {
    validate_dist(DiscreteDist(p.likelihood), "likelihood");
    if (p.likelihood.rank() != 2) {
        throw std::invalid_argument("likelihood must be an observation-by-state table");
    }
    if (p.transitions.empty()) {
        throw std::invalid_argument("at least one transition matrix required");
    }
    for (std::size_t a = 0; a < p.transitions.size(); ++a) {
        const Tensor& b = p.transitions[a];
        if (b.rank() != 2 || b.rows() != p.n_states() || b.cols() != p.n_states()) {
            std::ostringstream out;
            out << "transition matrix " << a << " is not state-by-state";
            throw std::invalid_argument(out.str());
        }
        validate_dist(DiscreteDist(b), "transition");
    }
    validate_dist(DiscreteDist(p.desire), "desire");
    if (p.desire.size() != p.n_obs()) {
        throw std::invalid_argument("desire size disagrees with the likelihood");
    }
    if (p.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
}

// Single-step perception: propagate the belief through the chosen action's
// transition, then condition on the observation. This is the positive-log
// fixed point of the single-step free energy, which coincides with the exact
// Bayes posterior.
inline DiscreteDist ai_perception_update(const TabularPOMDP& p, std::size_t obs,
                                         const DiscreteDist& prior, std::size_t action = 0) {
    validate_pomdp(p);
    validate_dist(prior, "prior");
    if (obs >= p.n_obs()) throw std::invalid_argument("observation index out of range");
    if (action >= p.n_actions()) throw std::invalid_argument("action index out of range");
    const Tensor pred = matmul(p.transitions[action], prior.probs);
    Tensor post({p.n_states()});
    double norm = 0.0;
    for (std::size_t x = 0; x < p.n_states(); ++x) {
        post[x] = p.likelihood.at(obs, x) * pred[x];
        norm += post[x];
    }
    if (norm <= 0.0) {
        std::ostringstream out;
        out << "observation " << obs << " has zero probability under the predicted belief";
        throw std::domain_error(out.str());
    }
    for (std::size_t x = 0; x < p.n_states(); ++x) post[x] /= norm;
    return DiscreteDist(post);
}

// The same posterior reached iteratively: exponentiated-gradient descent on
// the single-step free energy F(b) = sum_x b_x (ln b_x - c_x) with
// c = ln likelihood[obs,:] + ln(transition * prior). Each step contracts the
// log-space distance to the fixed point by (1 - rate), so any positive
// initialization converges to the update above.
inline DiscreteDist ai_perception_descent(const TabularPOMDP& p, std::size_t obs,
                                          const DiscreteDist& prior, const DiscreteDist& init,
                                          std::size_t steps, double rate) {
    validate_pomdp(p);
    validate_dist(prior, "prior");
    validate_dist(init, "init");
    if (obs >= p.n_obs()) throw std::invalid_argument("observation index out of range");
    const Tensor pred = matmul(p.transitions[0], prior.probs);
    const std::size_t n = p.n_states();
    Tensor c({n});
    for (std::size_t x = 0; x < n; ++x) {
        c[x] = detail::floored_log(p.likelihood.at(obs, x)) + detail::floored_log(pred[x]);
    }
    Tensor b = init.probs;
    for (std::size_t s = 0; s < steps; ++s) {
        Tensor next({n});
        double norm = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            next[x] = std::exp((1.0 - rate) * detail::floored_log(b[x]) + rate * c[x]);
            norm += next[x];
        }
        for (std::size_t x = 0; x < n; ++x) next[x] /= norm;
        b = next;
    }
    return DiscreteDist(b);
}

// Number of open-loop policies at the POMDP's horizon.
inline std::size_t policy_count(const TabularPOMDP& p) {
    std::size_t n = 1;
    for (std::size_t t = 0; t < p.horizon; ++t) n *= p.n_actions();
    return n;
}

// Action taken at step t under the policy with the given index. Policies are
// ordered lexicographically with the first step most significant.
inline std::size_t policy_action(const TabularPOMDP& p, std::size_t policy, std::size_t t) {
    std::size_t digit = policy;
    for (std::size_t s = t + 1; s < p.horizon; ++s) digit /= p.n_actions();
    return digit % p.n_actions();
}

// Per-policy cumulative score: at each step the belief is rolled through the
// policy's transition, and the step cost is the divergence of the predicted
// observation distribution from the desire plus the expected observation
// entropy under the rolled belief.
inline Tensor policy_efe_values(const TabularPOMDP& p, const DiscreteDist& belief) {
    validate_pomdp(p);
    validate_dist(belief, "belief");
    if (belief.size() != p.n_states()) {
        throw std::invalid_argument("belief size disagrees with the model");
    }
    if (p.n_actions() > 4 || p.horizon > 4) {
        std::ostringstream out;
        out << "policy enumeration budget exceeded: " << p.n_actions() << " actions over horizon "
            << p.horizon << " (at most 4 of each)";
        throw std::runtime_error(out.str());
    }
    const std::size_t n_pol = policy_count(p);
    Tensor column_entropy({p.n_states()});
    for (std::size_t x = 0; x < p.n_states(); ++x) {
        double h = 0.0;
        for (std::size_t o = 0; o < p.n_obs(); ++o) {
            const double v = p.likelihood.at(o, x);
            if (v > 0.0) h -= v * detail::floored_log(v);
        }
        column_entropy[x] = h;
    }
    Tensor values({n_pol});
    for (std::size_t pol = 0; pol < n_pol; ++pol) {
        Tensor b = belief.probs;
        double score = 0.0;
        for (std::size_t t = 0; t < p.horizon; ++t) {
            b = matmul(p.transitions[policy_action(p, pol, t)], b);
            const Tensor q_o = matmul(p.likelihood, b);
            for (std::size_t o = 0; o < p.n_obs(); ++o) {
                if (q_o[o] == 0.0) continue;
                if (p.desire[o] == 0.0) detail::throw_zero_obs("desire", o);
                score += q_o[o] * (detail::floored_log(q_o[o]) - detail::floored_log(p.desire[o]));
            }
            for (std::size_t x = 0; x < p.n_states(); ++x) score += b[x] * column_entropy[x];
        }
        values[pol] = score;
    }
    return values;
}

// Softmax policy posterior over the scores, at the POMDP's precision.
inline DiscreteDist ai_policy_posterior(const TabularPOMDP& p, const DiscreteDist& belief) {
    const Tensor values = policy_efe_values(p, belief);
    double lo = values[0];
    for (std::size_t i = 1; i < values.size(); ++i) lo = std::min(lo, values[i]);
    Tensor post({values.size()});
    double norm = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        post[i] = std::exp(-p.precision * (values[i] - lo));
        norm += post[i];
    }
    for (std::size_t i = 0; i < post.size(); ++i) post[i] /= norm;
    return DiscreteDist(post);
}

}  // namespace freegrad
