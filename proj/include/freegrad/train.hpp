// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared pieces for the training experiments: batched accuracy evaluation,
// exact gradient baselines for both network families, and the update
// directions the comparisons read off. The baselines follow the same rate
// and batch-averaging conventions as the iterative learners so parity runs
// differ only in how the gradients are produced.

#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "freegrad/arelax.hpp"
#include "freegrad/idx.hpp"
#include "freegrad/pc_hierarchical.hpp"
#include "freegrad/random.hpp"
#include "freegrad/tensor.hpp"

namespace freegrad {

inline Tensor concat_flat(const std::vector<Tensor>& parts) {
    std::size_t total = 0;
    for (const Tensor& p : parts) total += p.size();
    Tensor out(Shape{total});
    std::size_t at = 0;
    for (const Tensor& p : parts) {
        for (std::size_t i = 0; i < p.size(); ++i) out[at++] = p[i];
    }
    return out;
}

inline std::vector<std::size_t> epoch_order(std::size_t count, Rng& rng) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    return order;
}

inline std::size_t column_argmax(const Tensor& t, std::size_t col) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < t.rows(); ++r) {
        if (t.at(r, col) > t.at(best, col)) best = r;
    }
    return best;
}

namespace detail {

template <typename ScoreFn>
double dataset_accuracy(const Dataset& d, std::size_t batch, ScoreFn&& score) {
    if (d.count() == 0) throw std::invalid_argument("dataset_accuracy: empty dataset");
    std::vector<std::size_t> order(d.count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t hits = 0;
    for (std::size_t start = 0; start < d.count(); start += batch) {
        const std::size_t count = std::min(batch, d.count() - start);
        Tensor input, target;
        dataset_batch(d, order, start, count, input, target);
        const Tensor scores = score(input);
        for (std::size_t j = 0; j < count; ++j) {
            if (column_argmax(scores, j) == d.label_ids[start + j]) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(d.count());
}

}  // namespace detail

inline double pc_dataset_accuracy(const HierarchicalPCNet& net, const Dataset& d,
                                  std::size_t batch = 256) {
    return detail::dataset_accuracy(
        d, batch, [&](const Tensor& input) { return pc_forward(net, input)[0]; });
}

inline double ar_dataset_accuracy(ARNet& net, const Dataset& d, std::size_t batch = 256) {
    return detail::dataset_accuracy(
        d, batch, [&](const Tensor& input) { return ar_forward(net, input).back(); });
}

// Exact backward sweep through the feedforward cascade of a hierarchical net,
// returning the per-layer directions D[l] such that theta[l] += rate/batch *
// D[l] descends the squared output error. This is the same convention the
// Hebbian step applies to its relaxed errors, so the two trainings share
// their effective rate.
inline std::vector<Tensor> pc_backprop_directions(const HierarchicalPCNet& net,
                                                  const Tensor& input, const Tensor& target) {
    const std::vector<Tensor> values = pc_forward(net, input);
    if (target.shape() != values[0].shape()) {
        throw std::invalid_argument("pc_backprop_directions: target shape mismatch");
    }
    const std::size_t maps = net.layers() - 1;
    std::vector<Tensor> dirs(maps);
    Tensor delta;
    for (std::size_t l = 0; l < maps; ++l) {
        const Tensor pre = matmul(net.theta[l], values[l + 1]);
        Tensor eps = l == 0 ? target - values[0] : matmul(transpose(net.theta[l - 1]), delta);
        delta = hadamard(activation_deriv(net.activation, pre), eps);
        dirs[l] = matmul(delta, transpose(values[l + 1]));
    }
    return dirs;
}

inline void pc_backprop_weight_step(HierarchicalPCNet& net, const Tensor& input,
                                    const Tensor& target, double rate) {
    const std::vector<Tensor> dirs = pc_backprop_directions(net, input, target);
    const double batch = static_cast<double>(input.rank() == 2 ? input.cols() : 1);
    for (std::size_t l = 0; l < dirs.size(); ++l) net.theta[l] += (rate / batch) * dirs[l];
}

// The Hebbian update direction a relaxed state produces, without applying it.
inline std::vector<Tensor> pc_weight_directions(const HierarchicalPCNet& net, const PCState& s,
                                                const PCConfig& cfg) {
    std::vector<Tensor> dirs;
    for (std::size_t l = 0; l + 1 < net.layers(); ++l) {
        Tensor g = s.error[l];
        if (!cfg.drop_nonlinear_derivs) {
            g = hadamard(activation_deriv(net.activation, s.pre[l]), g);
        }
        dirs.push_back(matmul(g, transpose(s.value[l + 1])));
    }
    return dirs;
}

// Exact loss gradients for the standard-ordering net after ar_forward, by the
// plain adjoint recursion with true transposes and frozen gates. Verified
// against the reverse-mode oracle in the test suite; the relaxation compares
// against this at training scale, where mirroring the graph per batch would
// be wasteful.
inline std::vector<Tensor> ar_exact_gradients(const ARNet& net, const Tensor& output_error) {
    if (net.xbar.size() != net.sizes.size()) {
        throw std::logic_error("ar_exact_gradients: run ar_forward first");
    }
    std::vector<Tensor> grads(net.maps());
    Tensor delta = output_error;
    for (std::size_t l = net.maps(); l-- > 0;) {
        const Tensor gate = activation_deriv(ar_map_activation(net, l),
                                             matmul(net.weights[l], net.xbar[l]));
        const Tensor gated = hadamard(gate, delta);
        grads[l] = matmul(gated, transpose(net.xbar[l]));
        if (l > 0) delta = matmul(transpose(net.weights[l]), gated);
    }
    return grads;
}

}  // namespace freegrad
