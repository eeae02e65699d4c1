// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact evaluation of the discrete objective family: variational bounds over
// future observations and states, their decompositions, and the identities
// relating them. Everything here is an exhaustive sum over a categorical
// model, so every identity can be checked to floating-point accuracy rather
// than by sampling.

#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

#include "freegrad/tensor.hpp"

namespace freegrad {

namespace detail {

// Probabilities below this are floored before the logarithm; exact zeros are
// rejected by the callers instead so that silent clamping never hides an
// unsupported model.
inline constexpr double kLogFloor = 1e-300;

inline double floored_log(double p) { return std::log(p < kLogFloor ? kLogFloor : p); }

[[noreturn]] inline void throw_zero_cell(const char* table, std::size_t o, std::size_t x) {
    std::ostringstream out;
    out << table << " is zero at observation " << o << ", state " << x
        << " but carries predicted probability mass there";
    throw std::domain_error(out.str());
}

[[noreturn]] inline void throw_zero_obs(const char* table, std::size_t o) {
    std::ostringstream out;
    out << table << " is zero at observation " << o
        << " but carries predicted probability mass there";
    throw std::domain_error(out.str());
}

}  // namespace detail

// A categorical distribution: a rank-1 tensor of outcome probabilities, or a
// rank-2 tensor whose columns are each a conditional distribution.
struct DiscreteDist {
    Tensor probs;

    DiscreteDist() = default;
    explicit DiscreteDist(Tensor p) : probs(std::move(p)) {}

    std::size_t size() const { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }
};

// Distributions sum to one within 1e-12, column-wise for conditional tables,
// and carry no negative entries.
inline void validate_dist(const DiscreteDist& d, const char* name) {
    const Tensor& p = d.probs;
    if (p.size() == 0) {
        throw std::invalid_argument(std::string(name) + ": empty distribution");
    }
    if (p.rank() > 2) {
        throw std::invalid_argument(std::string(name) + ": rank above 2");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0) {
            throw std::invalid_argument(std::string(name) + ": negative probability");
        }
    }
    const std::size_t cols = p.rank() == 2 ? p.cols() : 1;
    const std::size_t rows = p.size() / cols;
    for (std::size_t c = 0; c < cols; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < rows; ++r) sum += p[r * cols + c];
        if (std::abs(sum - 1.0) > 1e-12) {
            std::ostringstream out;
            out << name << ": column " << c << " sums to " << sum;
            throw std::invalid_argument(out.str());
        }
    }
}

// Which variable the desire distribution ranges over when no explicit joint
// desire is supplied. Preferences over observations pair the desired
// observation marginal with the model's exact posterior; preferences over
// states pair the model's likelihood with the desired state marginal.
enum class DesireMode { observations, states };

// A one-step categorical model. The prior and likelihood define the
// predictive joint q(o, x); the desire fields define the biased target
// distribution the objectives compare it against.
struct DiscreteModel {
    DiscreteDist prior;            // q(x), size X
    DiscreteDist likelihood;       // q(o|x), columns over o for each x: {O, X}
    DiscreteDist desire_obs;       // optional desired observation marginal, size O
    DiscreteDist desire_state;     // optional desired state marginal, size X
    DiscreteDist desire_joint;     // optional explicit desired joint, {O, X}
    Tensor reward;                 // optional reward vector, desire ~ exp(-r)
    DesireMode desire_mode = DesireMode::observations;

    std::size_t n_states() const { return prior.size(); }
    std::size_t n_obs() const { return likelihood.probs.rows(); }
};

inline void validate_model(const DiscreteModel& m) {
    validate_dist(m.prior, "prior");
    validate_dist(m.likelihood, "likelihood");
    if (m.likelihood.probs.rank() != 2 || m.likelihood.probs.cols() != m.n_states()) {
        throw std::invalid_argument("likelihood table shape disagrees with the prior");
    }
    if (m.desire_obs.size() > 0) {
        validate_dist(m.desire_obs, "desire_obs");
        if (m.desire_obs.size() != m.n_obs()) {
            throw std::invalid_argument("desire_obs size disagrees with the likelihood");
        }
    }
    if (m.desire_state.size() > 0) {
        validate_dist(m.desire_state, "desire_state");
        if (m.desire_state.size() != m.n_states()) {
            throw std::invalid_argument("desire_state size disagrees with the prior");
        }
    }
    if (m.desire_joint.size() > 0) {
        if (m.desire_joint.probs.rank() != 2 ||
            m.desire_joint.probs.rows() != m.n_obs() ||
            m.desire_joint.probs.cols() != m.n_states()) {
            throw std::invalid_argument("desire_joint shape disagrees with the model");
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < m.desire_joint.size(); ++i) {
            if (m.desire_joint.probs[i] < 0.0) {
                throw std::invalid_argument("desire_joint: negative probability");
            }
            sum += m.desire_joint.probs[i];
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("desire_joint does not sum to 1");
        }
    }
}

// The reward-to-desire convention: desire ~ exp(-r), normalized.
inline DiscreteDist desire_from_reward(const Tensor& reward) {
    Tensor p(reward.shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < reward.size(); ++i) {
        p[i] = std::exp(-reward[i]);
        sum += p[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= sum;
    return DiscreteDist(p);
}

// The observation desire actually in force: an explicit marginal wins, else
// the reward vector is folded through the exp(-r) convention.
inline DiscreteDist effective_desire_obs(const DiscreteModel& m) {
    if (m.desire_obs.size() > 0) return m.desire_obs;
    if (m.reward.size() > 0) return desire_from_reward(m.reward);
    throw std::invalid_argument("model carries neither an observation desire nor a reward");
}

// Predictive joint q(o, x) = q(o|x) q(x).
inline Tensor predictive_joint(const DiscreteModel& m) {
    const std::size_t n_o = m.n_obs(), n_x = m.n_states();
    Tensor joint({n_o, n_x});
    for (std::size_t o = 0; o < n_o; ++o) {
        for (std::size_t x = 0; x < n_x; ++x) {
            joint.at(o, x) = m.likelihood.probs.at(o, x) * m.prior[x];
        }
    }
    return joint;
}

// Predicted observation marginal q(o).
inline Tensor obs_marginal(const Tensor& joint) {
    Tensor q({joint.rows()});
    for (std::size_t o = 0; o < joint.rows(); ++o) {
        for (std::size_t x = 0; x < joint.cols(); ++x) q[o] += joint.at(o, x);
    }
    return q;
}

// Exact Bayes posterior table q(x|o), columns over x for each observation
// stored row-wise: posterior.at(o, x) = q(x|o).
inline Tensor exact_posterior(const Tensor& joint, const Tensor& q_o) {
    Tensor post({joint.rows(), joint.cols()});
    for (std::size_t o = 0; o < joint.rows(); ++o) {
        for (std::size_t x = 0; x < joint.cols(); ++x) {
            post.at(o, x) = q_o[o] > 0.0 ? joint.at(o, x) / q_o[o] : 0.0;
        }
    }
    return post;
}

// The desired joint the objectives integrate against. An explicit joint wins;
// otherwise the desire mode picks the factorization: preferences over
// observations give desire(o) q(x|o), preferences over states give
// q(o|x) desire(x).
inline Tensor desired_joint(const DiscreteModel& m) {
    const std::size_t n_o = m.n_obs(), n_x = m.n_states();
    if (m.desire_joint.size() > 0) return m.desire_joint.probs;
    Tensor joint({n_o, n_x});
    if (m.desire_mode == DesireMode::observations) {
        const DiscreteDist desire = effective_desire_obs(m);
        const Tensor q_joint = predictive_joint(m);
        const Tensor post = exact_posterior(q_joint, obs_marginal(q_joint));
        for (std::size_t o = 0; o < n_o; ++o) {
            for (std::size_t x = 0; x < n_x; ++x) {
                joint.at(o, x) = desire[o] * post.at(o, x);
            }
        }
    } else {
        if (m.desire_state.size() == 0) {
            throw std::invalid_argument("desired_joint: no state desire supplied");
        }
        for (std::size_t o = 0; o < n_o; ++o) {
            for (std::size_t x = 0; x < n_x; ++x) {
                joint.at(o, x) = m.likelihood.probs.at(o, x) * m.desire_state[x];
            }
        }
    }
    return joint;
}

// Free energy of the future: E_{q(o,x)}[ln q(x|o) - ln desired(o,x)].
// An upper bound on the negative expected log desirability of observations.
inline double fef(const DiscreteModel& m) {
    validate_model(m);
    const Tensor joint = predictive_joint(m);
    const Tensor q_o = obs_marginal(joint);
    const Tensor post = exact_posterior(joint, q_o);
    const Tensor desired = desired_joint(m);
    double acc = 0.0;
    for (std::size_t o = 0; o < joint.rows(); ++o) {
        for (std::size_t x = 0; x < joint.cols(); ++x) {
            const double w = joint.at(o, x);
            if (w == 0.0) continue;
            if (desired.at(o, x) == 0.0) detail::throw_zero_cell("desired joint", o, x);
            acc += w * (detail::floored_log(post.at(o, x)) -
                        detail::floored_log(desired.at(o, x)));
        }
    }
    return acc;
}

// Expected free energy: E_{q(o,x)}[ln q(x) - ln desired(o,x)].
inline double efe(const DiscreteModel& m) {
    validate_model(m);
    const Tensor joint = predictive_joint(m);
    const Tensor desired = desired_joint(m);
    double acc = 0.0;
    for (std::size_t o = 0; o < joint.rows(); ++o) {
        for (std::size_t x = 0; x < joint.cols(); ++x) {
            const double w = joint.at(o, x);
            if (w == 0.0) continue;
            if (desired.at(o, x) == 0.0) detail::throw_zero_cell("desired joint", o, x);
            acc += w * (detail::floored_log(m.prior[x]) -
                        detail::floored_log(desired.at(o, x)));
        }
    }
    return acc;
}

// Free energy of the expected future: KL[q(o,x) || desired(o,x)].
inline double feef(const DiscreteModel& m) {
    validate_model(m);
    const Tensor joint = predictive_joint(m);
    const Tensor desired = desired_joint(m);
    double acc = 0.0;
    for (std::size_t o = 0; o < joint.rows(); ++o) {
        for (std::size_t x = 0; x < joint.cols(); ++x) {
            const double w = joint.at(o, x);
            if (w == 0.0) continue;
            if (desired.at(o, x) == 0.0) detail::throw_zero_cell("desired joint", o, x);
            acc += w * (detail::floored_log(w) - detail::floored_log(desired.at(o, x)));
        }
    }
    return acc;
}

struct EfeFefIdentity {
    double efe = 0.0;
    double fef = 0.0;
    double info_gain = 0.0;
    double residual = 0.0;
};

// The expected free energy is the free energy of the future minus the
// information gain E_{q(o)} KL[q(x|o) || q(x)]; the residual reports how far
// the computed values are from that identity.
inline EfeFefIdentity efe_fef_ig_identity(const DiscreteModel& m) {
    EfeFefIdentity out;
    out.efe = efe(m);
    out.fef = fef(m);
    const Tensor joint = predictive_joint(m);
    const Tensor post = exact_posterior(joint, obs_marginal(joint));
    for (std::size_t o = 0; o < joint.rows(); ++o) {
        for (std::size_t x = 0; x < joint.cols(); ++x) {
            const double w = joint.at(o, x);
            if (w == 0.0) continue;
            out.info_gain += w * (detail::floored_log(post.at(o, x)) -
                                  detail::floored_log(m.prior[x]));
        }
    }
    out.residual = out.efe - (out.fef - out.info_gain);
    return out;
}

// Expected log desirability of the predicted observations.
inline double evidence_objective(const DiscreteModel& m) {
    validate_model(m);
    const DiscreteDist desire = effective_desire_obs(m);
    const Tensor q_o = obs_marginal(predictive_joint(m));
    double acc = 0.0;
    for (std::size_t o = 0; o < q_o.size(); ++o) {
        if (q_o[o] == 0.0) continue;
        if (desire[o] == 0.0) detail::throw_zero_obs("desired marginal", o);
        acc += q_o[o] * detail::floored_log(desire[o]);
    }
    return acc;
}

// KL[q(o) || desire(o)]: the evidence objective plus a predicted-entropy
// regulariser, with the sign such that divergence = -entropy - evidence.
inline double divergence_objective(const DiscreteModel& m) {
    validate_model(m);
    const DiscreteDist desire = effective_desire_obs(m);
    const Tensor q_o = obs_marginal(predictive_joint(m));
    double acc = 0.0;
    for (std::size_t o = 0; o < q_o.size(); ++o) {
        if (q_o[o] == 0.0) continue;
        if (desire[o] == 0.0) detail::throw_zero_obs("desired marginal", o);
        acc += q_o[o] * (detail::floored_log(q_o[o]) - detail::floored_log(desire[o]));
    }
    return acc;
}

struct EntropyDecomposition {
    double marginal_entropy = 0.0;
    double likelihood_entropy_term = 0.0;
    double info_gain = 0.0;
    double residual = 0.0;
};

// H[q(o)] = E_{q(x)} H[q(o|x)] + I(o; x), the mutual-information split of the
// predicted observation entropy.
inline EntropyDecomposition entropy_decomposition(const DiscreteModel& m) {
    validate_model(m);
    EntropyDecomposition out;
    const Tensor joint = predictive_joint(m);
    const Tensor q_o = obs_marginal(joint);
    for (std::size_t o = 0; o < q_o.size(); ++o) {
        if (q_o[o] > 0.0) out.marginal_entropy -= q_o[o] * detail::floored_log(q_o[o]);
    }
    for (std::size_t x = 0; x < m.n_states(); ++x) {
        double h = 0.0;
        for (std::size_t o = 0; o < m.n_obs(); ++o) {
            const double p = m.likelihood.probs.at(o, x);
            if (p > 0.0) h -= p * detail::floored_log(p);
        }
        out.likelihood_entropy_term += m.prior[x] * h;
    }
    for (std::size_t o = 0; o < joint.rows(); ++o) {
        for (std::size_t x = 0; x < joint.cols(); ++x) {
            const double w = joint.at(o, x);
            if (w == 0.0) continue;
            out.info_gain +=
                w * (detail::floored_log(w) -
                     detail::floored_log(q_o[o]) - detail::floored_log(m.prior[x]));
        }
    }
    out.residual = out.marginal_entropy - out.likelihood_entropy_term - out.info_gain;
    return out;
}

// Expected reward minus the divergence from the prior policy. With a uniform
// prior the divergence reduces to the negative policy entropy plus ln |A|,
// which is kept in the returned value so the identity is exact.
inline double cai_maxent_objective(const DiscreteModel& m, const DiscreteDist& policy,
                                   const DiscreteDist& prior_policy) {
    validate_dist(policy, "policy");
    validate_dist(prior_policy, "prior_policy");
    if (m.reward.size() == 0) {
        throw std::invalid_argument("cai_maxent_objective: model carries no reward vector");
    }
    if (m.reward.size() != policy.size() || policy.size() != prior_policy.size()) {
        throw std::invalid_argument("cai_maxent_objective: size mismatch");
    }
    double acc = 0.0;
    for (std::size_t a = 0; a < policy.size(); ++a) {
        const double w = policy[a];
        if (w == 0.0) continue;
        if (prior_policy[a] == 0.0) {
            std::ostringstream out;
            out << "prior policy is zero at action " << a
                << " but the policy carries probability mass there";
            throw std::domain_error(out.str());
        }
        acc += w * m.reward[a];
        acc -= w * (detail::floored_log(w) - detail::floored_log(prior_policy[a]));
    }
    return acc;
}

}  // namespace freegrad
