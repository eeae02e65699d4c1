// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "freegrad/objectives.hpp"
#include "freegrad/random.hpp"
#include "freegrad/tensor.hpp"

using namespace freegrad;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

// Strictly positive distributions so every logarithm is safe.
DiscreteDist random_dist(Rng& rng, std::size_t n) {
    Tensor p({n});
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = rng.uniform(0.05, 1.0);
        sum += p[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] /= sum;
    return DiscreteDist(p);
}

Tensor random_conditional(Rng& rng, std::size_t n_rows, std::size_t n_cols) {
    Tensor t({n_rows, n_cols});
    for (std::size_t c = 0; c < n_cols; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n_rows; ++r) {
            t.at(r, c) = rng.uniform(0.05, 1.0);
            sum += t.at(r, c);
        }
        for (std::size_t r = 0; r < n_rows; ++r) t.at(r, c) /= sum;
    }
    return t;
}

Tensor random_joint(Rng& rng, std::size_t n_rows, std::size_t n_cols) {
    Tensor t({n_rows, n_cols});
    double sum = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.uniform(0.05, 1.0);
        sum += t[i];
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] /= sum;
    return t;
}

DiscreteModel random_model(Rng& rng) {
    const std::size_t n_x = 2 + rng.index(7);
    const std::size_t n_o = 2 + rng.index(7);
    DiscreteModel m;
    m.prior = random_dist(rng, n_x);
    m.likelihood = DiscreteDist(random_conditional(rng, n_o, n_x));
    return m;
}

// Exhaustive sums straight from the definitions, written against the raw
// tables rather than the library accessors.
struct OracleTables {
    std::size_t n_o = 0, n_x = 0;
    std::vector<double> joint;      // q(o, x)
    std::vector<double> q_o;        // q(o)
    std::vector<double> posterior;  // q(x | o)
};

OracleTables oracle_tables(const DiscreteModel& m) {
    OracleTables t;
    t.n_o = m.n_obs();
    t.n_x = m.n_states();
    t.joint.assign(t.n_o * t.n_x, 0.0);
    t.q_o.assign(t.n_o, 0.0);
    t.posterior.assign(t.n_o * t.n_x, 0.0);
    for (std::size_t o = 0; o < t.n_o; ++o) {
        for (std::size_t x = 0; x < t.n_x; ++x) {
            t.joint[o * t.n_x + x] = m.likelihood.probs.at(o, x) * m.prior[x];
            t.q_o[o] += t.joint[o * t.n_x + x];
        }
        for (std::size_t x = 0; x < t.n_x; ++x) {
            t.posterior[o * t.n_x + x] = t.joint[o * t.n_x + x] / t.q_o[o];
        }
    }
    return t;
}

std::vector<double> oracle_desired(const DiscreteModel& m, const OracleTables& t) {
    std::vector<double> d(t.n_o * t.n_x, 0.0);
    for (std::size_t o = 0; o < t.n_o; ++o) {
        for (std::size_t x = 0; x < t.n_x; ++x) {
            if (m.desire_joint.size() > 0) {
                d[o * t.n_x + x] = m.desire_joint.probs.at(o, x);
            } else if (m.desire_mode == DesireMode::observations) {
                d[o * t.n_x + x] = m.desire_obs[o] * t.posterior[o * t.n_x + x];
            } else {
                d[o * t.n_x + x] = m.likelihood.probs.at(o, x) * m.desire_state[x];
            }
        }
    }
    return d;
}

DiscreteModel uniform_two_by_two() {
    DiscreteModel m;
    m.prior = DiscreteDist(Tensor({2}, {0.5, 0.5}));
    m.likelihood = DiscreteDist(Tensor({2, 2}, {0.5, 0.5, 0.5, 0.5}));
    m.desire_obs = DiscreteDist(Tensor({2}, {0.5, 0.5}));
    return m;
}

}  // namespace

TEST_CASE("distribution validation rejects malformed tables", "[objectives]") {
    CHECK_THROWS_MATCHES(validate_dist(DiscreteDist(Tensor({2}, {0.6, 0.5})), "p"),
                         std::invalid_argument, MessageMatches(ContainsSubstring("sums to")));
    CHECK_THROWS_MATCHES(validate_dist(DiscreteDist(Tensor({2}, {1.5, -0.5})), "p"),
                         std::invalid_argument, MessageMatches(ContainsSubstring("negative")));
    CHECK_THROWS_MATCHES(validate_dist(DiscreteDist(), "p"), std::invalid_argument,
                         MessageMatches(ContainsSubstring("empty")));
    // Per-column normalization of conditional tables: second column short.
    CHECK_THROWS_MATCHES(
        validate_dist(DiscreteDist(Tensor({2, 2}, {0.5, 0.4, 0.5, 0.5})), "p"),
        std::invalid_argument, MessageMatches(ContainsSubstring("column 1")));
    CHECK_NOTHROW(validate_dist(DiscreteDist(Tensor({2, 2}, {0.3, 0.9, 0.7, 0.1})), "p"));

    DiscreteModel bad;
    bad.prior = DiscreteDist(Tensor({3}, {0.2, 0.3, 0.5}));
    bad.likelihood = DiscreteDist(Tensor({2, 2}, {0.3, 0.9, 0.7, 0.1}));
    CHECK_THROWS_MATCHES(validate_model(bad), std::invalid_argument,
                         MessageMatches(ContainsSubstring("disagrees")));
}

TEST_CASE("future free energy is tight for observation-factored desires", "[objectives]") {
    // With the desired joint factored as desire(o) q(x|o), the posterior terms
    // cancel and the objective equals the negative expected log desire exactly.
    Rng rng(401);
    for (int trial = 0; trial < 200; ++trial) {
        DiscreteModel m = random_model(rng);
        m.desire_obs = random_dist(rng, m.n_obs());
        const OracleTables t = oracle_tables(m);
        double expected = 0.0;
        for (std::size_t o = 0; o < t.n_o; ++o) expected -= t.q_o[o] * std::log(m.desire_obs[o]);
        CHECK(fef(m) == Catch::Approx(expected).margin(1e-12).epsilon(0.0));
    }
}

TEST_CASE("uniform two-state two-observation model scores log 2", "[objectives]") {
    const DiscreteModel m = uniform_two_by_two();
    const double log2 = std::log(2.0);
    CHECK(fef(m) == Catch::Approx(log2).margin(1e-14).epsilon(0.0));
    CHECK(efe(m) == Catch::Approx(log2).margin(1e-14).epsilon(0.0));
    // The joint prediction already matches the desired joint, so the joint
    // divergence vanishes while the marginal objectives sit at log 2.
    CHECK(feef(m) == Catch::Approx(0.0).margin(1e-14).epsilon(0.0));
    CHECK(evidence_objective(m) == Catch::Approx(-log2).margin(1e-14).epsilon(0.0));
    CHECK(divergence_objective(m) == Catch::Approx(0.0).margin(1e-14).epsilon(0.0));

    // The same number through an explicit uniform joint desire.
    DiscreteModel explicit_joint = m;
    explicit_joint.desire_obs = DiscreteDist();
    explicit_joint.desire_joint = DiscreteDist(Tensor({2, 2}, {0.25, 0.25, 0.25, 0.25}));
    CHECK(fef(explicit_joint) == Catch::Approx(log2).margin(1e-14).epsilon(0.0));
}

TEST_CASE("future free energy bounds the expected log desire", "[objectives]") {
    Rng rng(402);
    for (int trial = 0; trial < 1000; ++trial) {
        DiscreteModel m = random_model(rng);
        m.desire_joint = DiscreteDist(random_joint(rng, m.n_obs(), m.n_states()));
        const OracleTables t = oracle_tables(m);
        // Desired observation marginal from the joint desire.
        double log_score = 0.0;
        for (std::size_t o = 0; o < t.n_o; ++o) {
            double marg = 0.0;
            for (std::size_t x = 0; x < t.n_x; ++x) marg += m.desire_joint.probs.at(o, x);
            log_score += t.q_o[o] * std::log(marg);
        }
        REQUIRE(fef(m) + log_score >= -1e-12);
    }
}

TEST_CASE("expected free energy decomposes into risk plus ambiguity", "[objectives]") {
    // State-factored desires make the decomposition exact: divergence of the
    // state prediction from the desired states, plus expected observation
    // entropy.
    Rng rng(403);
    for (int trial = 0; trial < 1000; ++trial) {
        DiscreteModel m = random_model(rng);
        m.desire_mode = DesireMode::states;
        m.desire_state = random_dist(rng, m.n_states());
        double risk = 0.0, ambiguity = 0.0;
        for (std::size_t x = 0; x < m.n_states(); ++x) {
            risk += m.prior[x] * (std::log(m.prior[x]) - std::log(m.desire_state[x]));
            double h = 0.0;
            for (std::size_t o = 0; o < m.n_obs(); ++o) {
                const double v = m.likelihood.probs.at(o, x);
                h -= v * std::log(v);
            }
            ambiguity += m.prior[x] * h;
        }
        REQUIRE(efe(m) == Catch::Approx(risk + ambiguity).margin(1e-12).epsilon(0.0));
    }
}

TEST_CASE("deterministic likelihood zeroes ambiguity and the entropy gap", "[objectives]") {
    // A permutation likelihood has zero-entropy columns: the expected free
    // energy reduces to the risk term alone, and the joint objective matches
    // it because the observation log-likelihood vanishes on the support.
    DiscreteModel m;
    m.prior = DiscreteDist(Tensor({3}, {0.2, 0.5, 0.3}));
    m.likelihood = DiscreteDist(Tensor({3, 3}, {0.0, 1.0, 0.0,   //
                                                0.0, 0.0, 1.0,   //
                                                1.0, 0.0, 0.0}));
    m.desire_mode = DesireMode::states;
    m.desire_state = DiscreteDist(Tensor({3}, {0.3, 0.3, 0.4}));
    double risk = 0.0;
    for (std::size_t x = 0; x < 3; ++x) {
        risk += m.prior[x] * (std::log(m.prior[x]) - std::log(m.desire_state[x]));
    }
    CHECK(efe(m) == Catch::Approx(risk).margin(1e-14).epsilon(0.0));
    CHECK(feef(m) == Catch::Approx(efe(m)).margin(1e-14).epsilon(0.0));
}

TEST_CASE("uninformative likelihood collapses the information gain", "[objectives]") {
    // Every state produces the same observation distribution, so observing
    // teaches nothing and the two future free energies coincide.
    DiscreteModel m;
    m.prior = DiscreteDist(Tensor({3}, {0.2, 0.5, 0.3}));
    m.likelihood = DiscreteDist(Tensor({2, 3}, {0.4, 0.4, 0.4,   //
                                                0.6, 0.6, 0.6}));
    m.desire_obs = DiscreteDist(Tensor({2}, {0.7, 0.3}));
    const EfeFefIdentity id = efe_fef_ig_identity(m);
    CHECK(id.info_gain == Catch::Approx(0.0).margin(1e-14).epsilon(0.0));
    CHECK(id.efe == Catch::Approx(id.fef).margin(1e-14).epsilon(0.0));
    CHECK(std::abs(id.residual) < 1e-14);
}

TEST_CASE("expected and future free energies differ by the information gain", "[objectives]") {
    Rng rng(404);
    for (int trial = 0; trial < 1000; ++trial) {
        DiscreteModel m = random_model(rng);
        // Cycle the desire encodings so each factorization is swept.
        switch (trial % 3) {
            case 0: m.desire_obs = random_dist(rng, m.n_obs()); break;
            case 1:
                m.desire_mode = DesireMode::states;
                m.desire_state = random_dist(rng, m.n_states());
                break;
            default:
                m.desire_joint = DiscreteDist(random_joint(rng, m.n_obs(), m.n_states()));
                break;
        }
        const OracleTables t = oracle_tables(m);
        const std::vector<double> desired = oracle_desired(m, t);
        double o_fef = 0.0, o_efe = 0.0, o_ig = 0.0;
        for (std::size_t o = 0; o < t.n_o; ++o) {
            for (std::size_t x = 0; x < t.n_x; ++x) {
                const double w = t.joint[o * t.n_x + x];
                const double post = t.posterior[o * t.n_x + x];
                o_fef += w * (std::log(post) - std::log(desired[o * t.n_x + x]));
                o_efe += w * (std::log(m.prior[x]) - std::log(desired[o * t.n_x + x]));
                o_ig += w * (std::log(post) - std::log(m.prior[x]));
            }
        }
        const EfeFefIdentity id = efe_fef_ig_identity(m);
        REQUIRE(id.fef == Catch::Approx(o_fef).margin(1e-12).epsilon(0.0));
        REQUIRE(id.efe == Catch::Approx(o_efe).margin(1e-12).epsilon(0.0));
        REQUIRE(id.info_gain == Catch::Approx(o_ig).margin(1e-12).epsilon(0.0));
        REQUIRE(std::abs(id.residual) < 1e-12);
        REQUIRE(id.info_gain >= -1e-12);
    }
}

TEST_CASE("joint objective adds the observation log-likelihood", "[objectives]") {
    Rng rng(405);
    for (int trial = 0; trial < 1000; ++trial) {
        DiscreteModel m = random_model(rng);
        if (trial % 2 == 0) {
            m.desire_obs = random_dist(rng, m.n_obs());
        } else {
            m.desire_joint = DiscreteDist(random_joint(rng, m.n_obs(), m.n_states()));
        }
        const OracleTables t = oracle_tables(m);
        double obs_loglik = 0.0;
        for (std::size_t o = 0; o < t.n_o; ++o) {
            for (std::size_t x = 0; x < t.n_x; ++x) {
                obs_loglik += t.joint[o * t.n_x + x] * std::log(m.likelihood.probs.at(o, x));
            }
        }
        REQUIRE(feef(m) == Catch::Approx(efe(m) + obs_loglik).margin(1e-12).epsilon(0.0));
    }

    // A desire identical to the prediction zeroes the joint divergence.
    DiscreteModel m = random_model(rng);
    m.desire_joint = DiscreteDist(predictive_joint(m));
    CHECK(feef(m) == Catch::Approx(0.0).margin(1e-13).epsilon(0.0));
}

TEST_CASE("product-of-marginals desire turns the bound into an equality", "[objectives]") {
    Rng rng(406);
    for (int trial = 0; trial < 100; ++trial) {
        DiscreteModel m = random_model(rng);
        const OracleTables t = oracle_tables(m);
        Tensor joint({m.n_obs(), m.n_states()});
        for (std::size_t o = 0; o < t.n_o; ++o) {
            for (std::size_t x = 0; x < t.n_x; ++x) joint.at(o, x) = t.q_o[o] * m.prior[x];
        }
        m.desire_joint = DiscreteDist(joint);
        double neg_log_score = 0.0;
        for (std::size_t o = 0; o < t.n_o; ++o) neg_log_score -= t.q_o[o] * std::log(t.q_o[o]);
        REQUIRE(efe(m) == Catch::Approx(neg_log_score).margin(1e-12).epsilon(0.0));
    }
}

TEST_CASE("evidence and divergence objectives satisfy the entropy identity", "[objectives]") {
    Rng rng(407);
    for (int trial = 0; trial < 1000; ++trial) {
        DiscreteModel m = random_model(rng);
        m.desire_obs = random_dist(rng, m.n_obs());
        const OracleTables t = oracle_tables(m);
        double entropy = 0.0;
        for (std::size_t o = 0; o < t.n_o; ++o) entropy -= t.q_o[o] * std::log(t.q_o[o]);
        const double ev = evidence_objective(m);
        const double dv = divergence_objective(m);
        REQUIRE(dv == Catch::Approx(-entropy - ev).margin(1e-12).epsilon(0.0));
        REQUIRE(dv >= -1e-12);
    }

    // Desiring exactly the predicted observations zeroes the divergence.
    DiscreteModel m = random_model(rng);
    m.desire_obs = DiscreteDist(obs_marginal(predictive_joint(m)));
    CHECK(divergence_objective(m) == Catch::Approx(0.0).margin(1e-13).epsilon(0.0));

    // A uniform desire scores -log n for every model.
    DiscreteModel u = random_model(rng);
    u.desire_obs = DiscreteDist(Tensor::full({u.n_obs()}, 1.0 / static_cast<double>(u.n_obs())));
    CHECK(evidence_objective(u) ==
          Catch::Approx(-std::log(static_cast<double>(u.n_obs()))).margin(1e-13).epsilon(0.0));
}

TEST_CASE("entropy decomposition splits the marginal entropy exactly", "[objectives]") {
    Rng rng(408);
    for (int trial = 0; trial < 1000; ++trial) {
        const DiscreteModel m = random_model(rng);
        const OracleTables t = oracle_tables(m);
        double o_marg = 0.0, o_cond = 0.0, o_mi = 0.0;
        for (std::size_t o = 0; o < t.n_o; ++o) o_marg -= t.q_o[o] * std::log(t.q_o[o]);
        for (std::size_t x = 0; x < t.n_x; ++x) {
            for (std::size_t o = 0; o < t.n_o; ++o) {
                const double v = m.likelihood.probs.at(o, x);
                o_cond -= m.prior[x] * v * std::log(v);
                const double w = t.joint[o * t.n_x + x];
                o_mi += w * (std::log(w) - std::log(t.q_o[o]) - std::log(m.prior[x]));
            }
        }
        const EntropyDecomposition d = entropy_decomposition(m);
        REQUIRE(d.marginal_entropy == Catch::Approx(o_marg).margin(1e-12).epsilon(0.0));
        REQUIRE(d.likelihood_entropy_term == Catch::Approx(o_cond).margin(1e-12).epsilon(0.0));
        REQUIRE(d.info_gain == Catch::Approx(o_mi).margin(1e-12).epsilon(0.0));
        REQUIRE(std::abs(d.residual) < 1e-12);
    }
}

TEST_CASE("independent and deterministic channels at the decomposition edges", "[objectives]") {
    // Identical likelihood columns make observation and state independent.
    DiscreteModel ind;
    ind.prior = DiscreteDist(Tensor({3}, {0.2, 0.5, 0.3}));
    ind.likelihood = DiscreteDist(Tensor({2, 3}, {0.4, 0.4, 0.4,   //
                                                  0.6, 0.6, 0.6}));
    const EntropyDecomposition di = entropy_decomposition(ind);
    CHECK(di.info_gain == Catch::Approx(0.0).margin(1e-14).epsilon(0.0));

    // A permutation likelihood relabels states, leaving the entropy equal to
    // the prior's.
    DiscreteModel perm;
    perm.prior = DiscreteDist(Tensor({3}, {0.2, 0.5, 0.3}));
    perm.likelihood = DiscreteDist(Tensor({3, 3}, {0.0, 1.0, 0.0,   //
                                                   0.0, 0.0, 1.0,   //
                                                   1.0, 0.0, 0.0}));
    double prior_entropy = 0.0;
    for (std::size_t x = 0; x < 3; ++x) prior_entropy -= perm.prior[x] * std::log(perm.prior[x]);
    const EntropyDecomposition dp = entropy_decomposition(perm);
    CHECK(dp.marginal_entropy == Catch::Approx(prior_entropy).margin(1e-14).epsilon(0.0));
    CHECK(dp.likelihood_entropy_term == Catch::Approx(0.0).margin(1e-14).epsilon(0.0));
}

TEST_CASE("reward vectors encode desires through the exponential convention", "[objectives]") {
    const DiscreteDist d = desire_from_reward(Tensor({2}, {0.0, std::log(3.0)}));
    CHECK(d[0] == Catch::Approx(0.75).margin(1e-14).epsilon(0.0));
    CHECK(d[1] == Catch::Approx(0.25).margin(1e-14).epsilon(0.0));

    // The evidence objective folds the reward in when no explicit desire is
    // set.
    Rng rng(409);
    DiscreteModel m = random_model(rng);
    m.reward = Tensor({m.n_obs()});
    for (std::size_t o = 0; o < m.n_obs(); ++o) m.reward[o] = rng.uniform(-1.0, 1.0);
    const DiscreteDist via_reward = desire_from_reward(m.reward);
    const OracleTables t = oracle_tables(m);
    double expected = 0.0;
    for (std::size_t o = 0; o < t.n_o; ++o) expected += t.q_o[o] * std::log(via_reward[o]);
    CHECK(evidence_objective(m) == Catch::Approx(expected).margin(1e-13).epsilon(0.0));
}

TEST_CASE("max entropy objective equals reward plus policy entropy", "[objectives]") {
    Rng rng(410);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.index(5);
        DiscreteModel m;
        m.prior = DiscreteDist(Tensor({1}, {1.0}));
        m.likelihood = DiscreteDist(Tensor({1, 1}, {1.0}));
        m.reward = Tensor({n});
        for (std::size_t a = 0; a < n; ++a) m.reward[a] = rng.uniform(-2.0, 2.0);
        const DiscreteDist policy = random_dist(rng, n);
        const DiscreteDist uniform(Tensor::full({n}, 1.0 / static_cast<double>(n)));
        double expected_reward = 0.0, entropy = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            expected_reward += policy[a] * m.reward[a];
            entropy -= policy[a] * std::log(policy[a]);
        }
        const double objective = cai_maxent_objective(m, policy, uniform);
        REQUIRE(objective == Catch::Approx(expected_reward + entropy -
                                           std::log(static_cast<double>(n)))
                                 .margin(1e-12).epsilon(0.0));
    }
}

TEST_CASE("max entropy objective edge cases", "[objectives]") {
    DiscreteModel m;
    m.prior = DiscreteDist(Tensor({1}, {1.0}));
    m.likelihood = DiscreteDist(Tensor({1, 1}, {1.0}));
    m.reward = Tensor({3}, {1.0, 2.0, 0.5});
    const DiscreteDist uniform(Tensor::full({3}, 1.0 / 3.0));

    // A deterministic policy has zero entropy: reward minus log of the
    // action count.
    const DiscreteDist det(Tensor({3}, {0.0, 1.0, 0.0}));
    CHECK(cai_maxent_objective(m, det, uniform) ==
          Catch::Approx(2.0 - std::log(3.0)).margin(1e-14).epsilon(0.0));

    // With a flat reward the uniform policy is the maximizer.
    DiscreteModel flat = m;
    flat.reward = Tensor({3});
    CHECK(cai_maxent_objective(flat, uniform, uniform) == Catch::Approx(0.0).margin(1e-14).epsilon(0.0));
    Rng rng(411);
    for (int trial = 0; trial < 50; ++trial) {
        const DiscreteDist policy = random_dist(rng, 3);
        CHECK(cai_maxent_objective(flat, policy, uniform) <= 1e-12);
    }

    // Mass on an action the prior policy excludes is an error.
    const DiscreteDist half(Tensor({3}, {0.5, 0.5, 0.0}));
    CHECK_THROWS_MATCHES(cai_maxent_objective(m, uniform, half), std::domain_error,
                         MessageMatches(ContainsSubstring("action 2")));
    DiscreteModel no_reward = m;
    no_reward.reward = Tensor();
    CHECK_THROWS_MATCHES(cai_maxent_objective(no_reward, uniform, uniform),
                         std::invalid_argument, MessageMatches(ContainsSubstring("reward")));
}

TEST_CASE("zero desire cells raise domain errors naming the cell", "[objectives]") {
    DiscreteModel m;
    m.prior = DiscreteDist(Tensor({2}, {0.5, 0.5}));
    m.likelihood = DiscreteDist(Tensor({2, 2}, {0.3, 0.6, 0.7, 0.4}));
    m.desire_obs = DiscreteDist(Tensor({2}, {1.0, 0.0}));
    CHECK_THROWS_MATCHES(fef(m), std::domain_error,
                         MessageMatches(ContainsSubstring("observation 1")));
    CHECK_THROWS_MATCHES(evidence_objective(m), std::domain_error,
                         MessageMatches(ContainsSubstring("observation 1")));
    CHECK_THROWS_MATCHES(divergence_objective(m), std::domain_error,
                         MessageMatches(ContainsSubstring("observation 1")));

    DiscreteModel j = m;
    j.desire_obs = DiscreteDist();
    j.desire_joint = DiscreteDist(Tensor({2, 2}, {0.4, 0.0, 0.3, 0.3}));
    CHECK_THROWS_MATCHES(efe(j), std::domain_error,
                         MessageMatches(ContainsSubstring("state 1")));

    DiscreteModel none = m;
    none.desire_obs = DiscreteDist();
    CHECK_THROWS_MATCHES(fef(none), std::invalid_argument,
                         MessageMatches(ContainsSubstring("desire")));
}
