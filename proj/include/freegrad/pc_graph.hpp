// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Iterative credit assignment on arbitrary computation graphs. Every computed
// vertex gets an error unit; predictions are frozen at the feedforward values
// and the vertex values relax by steepest descent on the total squared error.
// At the fixed point each error equals the corresponding reverse-mode
// adjoint, so the returned tape is directly comparable with reverse_ad.

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "freegrad/graph.hpp"
#include "freegrad/pc_hierarchical.hpp"

namespace freegrad {

struct PCBackpropResult {
    AdjointTape tape;
    bool converged = false;
    std::size_t iterations = 0;
    double residual = 0.0;  // max |dv| over free vertices at the last step
};

// Observer invoked after each relaxation step with the current per-vertex
// errors (indexed like the graph's vertices; inputs hold empty tensors).
using PCTraceFn = std::function<void(std::size_t iter, const std::vector<Tensor>& errors)>;

inline PCBackpropResult pc_backprop(const ComputationGraph& g,
                                    const std::map<std::string, Tensor>& inputs,
                                    const Tensor& loss_grad, const PCConfig& cfg,
                                    const PCTraceFn& trace = {}) {
    const std::size_t n = g.vertex_count();
    const std::size_t out = g.output();
    const std::vector<Tensor> frozen = forward(g, inputs);

    // Free vertices are the computed non-output ones; the output's error is
    // clamped to the loss gradient for the whole relaxation. Edges whose
    // parents are all inputs cannot influence any free vertex, so their
    // backward products are deferred to the final tape.
    std::vector<bool> free_vertex(n, false), feeds_free(n, false);
    for (std::size_t id = 0; id < n; ++id) {
        const Vertex& v = g.vertex(id);
        if (v.is_input()) continue;
        if (id != out) free_vertex[id] = true;
        for (std::size_t p : v.parents) {
            if (!g.vertex(p).is_input()) feeds_free[id] = true;
        }
    }

    std::vector<Tensor> value = frozen;
    std::vector<Tensor> error(n);
    for (std::size_t id = 0; id < n; ++id) {
        if (!g.vertex(id).is_input()) error[id] = Tensor(g.vertex(id).shape);
    }
    Tensor seed(g.vertex(out).shape);
    for (std::size_t i = 0; i < seed.size(); ++i) seed[i] = loss_grad[i];
    error[out] = seed;

    PCBackpropResult result;
    std::vector<Tensor> drive(n);
    for (std::size_t it = 0; it < cfg.inference_iters; ++it) {
        // errors at current values, predictions frozen
        for (std::size_t id = 0; id < n; ++id) {
            if (free_vertex[id]) error[id] = value[id] - frozen[id];
        }
        // children push their errors back through frozen Jacobians
        for (std::size_t id = 0; id < n; ++id) drive[id] = Tensor(g.vertex(id).shape);
        for (std::size_t id = 0; id < n; ++id) {
            if (!g.vertex(id).is_input() && feeds_free[id]) {
                edge_vjp(g, id, frozen, error[id], drive, nullptr);
            }
        }
        double residual = 0.0;
        for (std::size_t id = 0; id < n; ++id) {
            if (!free_vertex[id]) continue;
            drive[id] -= error[id];
            residual = std::max(residual, max_abs(drive[id]));
            value[id] += cfg.inference_rate * drive[id];
        }
        result.iterations = it + 1;
        result.residual = residual;
        if (trace) {
            for (std::size_t id = 0; id < n; ++id) {
                if (free_vertex[id]) error[id] = value[id] - frozen[id];
            }
            trace(it + 1, error);
        }
        if (residual < cfg.convergence_tol) {
            result.converged = true;
            break;
        }
    }

    for (std::size_t id = 0; id < n; ++id) {
        if (free_vertex[id]) error[id] = value[id] - frozen[id];
    }

    // Assemble the tape: equilibrium errors stand in for adjoints, input
    // adjoints and parameter gradients follow from them exactly as in
    // reverse mode.
    AdjointTape tape;
    tape.values = frozen;
    tape.adjoints.assign(n, Tensor());
    for (std::size_t id = 0; id < n; ++id) tape.adjoints[id] = Tensor(g.vertex(id).shape);
    for (const auto& [name, value_] : g.params()) {
        tape.param_grads.emplace(name, Tensor(value_.shape()));
    }
    for (std::size_t id = 0; id < n; ++id) {
        if (!g.vertex(id).is_input()) {
            for (std::size_t i = 0; i < error[id].size(); ++i) tape.adjoints[id][i] = error[id][i];
        }
    }
    std::vector<Tensor> input_accum(n);
    for (std::size_t id = 0; id < n; ++id) input_accum[id] = Tensor(g.vertex(id).shape);
    for (std::size_t id = 0; id < n; ++id) {
        if (!g.vertex(id).is_input()) {
            edge_vjp(g, id, frozen, error[id], input_accum, &tape.param_grads);
        }
    }
    for (std::size_t id = 0; id < n; ++id) {
        if (g.vertex(id).is_input()) tape.adjoints[id] = input_accum[id];
    }
    result.tape = std::move(tape);
    return result;
}

}  // namespace freegrad
