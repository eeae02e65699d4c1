// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Ready-made graphs: the scalar branching test function, multilayer
// perceptrons, a single LSTM cell, and a small convolutional classifier.

#pragma once

#include <string>
#include <vector>

#include "freegrad/graph.hpp"
#include "freegrad/random.hpp"

namespace freegrad {

// v_out = tan(sqrt(theta * v0)) + sin(v0^2), a scalar function whose graph
// branches at v0 and rejoins at the sum. theta defaults to 2; bind v0 at
// evaluation time.
inline ComputationGraph build_scalar_test(double theta = 2.0) {
    ComputationGraph g;
    g.add_param("theta", Tensor({1, 1}, {theta}));
    const auto v0 = g.add_input("v0", {1});
    const auto prod = g.add_vertex("prod", EdgeFunction::linear("theta"), {v0});
    const auto root = g.add_vertex("root", EdgeFunction::of(EdgeKind::sqrt_op), {prod});
    const auto tang = g.add_vertex("tan", EdgeFunction::of(EdgeKind::tan_op), {root});
    const auto sq = g.add_vertex("square", EdgeFunction::of(EdgeKind::square), {v0});
    const auto sine = g.add_vertex("sin", EdgeFunction::of(EdgeKind::sin_op), {sq});
    const auto out = g.add_vertex("out", EdgeFunction::of(EdgeKind::add), {tang, sine});
    g.set_output(out);
    return g;
}

// Fully connected chain: linear map then activation for each hidden layer,
// linear output layer. Weight W{l} maps layer l-1 to layer l. Weights start
// at zero; callers seed them via init_params or set_param.
inline ComputationGraph build_mlp(const std::vector<std::size_t>& layer_sizes,
                                  ActivationKind activation) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("build_mlp needs >= 2 layer sizes");
    ComputationGraph g;
    for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
        g.add_param("W" + std::to_string(l), Tensor({layer_sizes[l], layer_sizes[l - 1]}));
    }
    std::size_t prev = g.add_input("x", {layer_sizes[0]});
    for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
        const std::string tag = std::to_string(l);
        prev = g.add_vertex("z" + tag, EdgeFunction::linear("W" + tag), {prev});
        if (l + 1 < layer_sizes.size()) {
            prev = g.add_vertex("a" + tag, EdgeFunction::activation_fn(activation), {prev});
        }
    }
    g.set_output(prev);
    return g;
}

// One LSTM cell as eleven computed vertices: the gate equations are fused
// activation-of-linear edges so each listed step is a single vertex.
//   v1 = (h, x)            v2 = sig(Wf v1)     v3 = c * v2
//   v4 = sig(Wi v1)        v5 = tanh(Wc v1)    v6 = v4 * v5
//   v7 = v3 + v6           v8 = sig(Wo v1)     v9 = tanh(v7)
//   v10 = v8 * v9          y  = sig(Wy v10)
// v7 is the new cell state and v10 the new hidden state. No bias terms.
inline ComputationGraph build_lstm_cell(std::size_t hidden, std::size_t input) {
    if (hidden == 0 || input == 0) throw std::invalid_argument("build_lstm_cell sizes must be >= 1");
    ComputationGraph g;
    const std::size_t joint = hidden + input;
    for (const char* name : {"Wf", "Wi", "Wc", "Wo"}) g.add_param(name, Tensor({hidden, joint}));
    g.add_param("Wy", Tensor({input, hidden}));
    const auto h = g.add_input("h", {hidden});
    const auto x = g.add_input("x", {input});
    const auto c = g.add_input("c", {hidden});
    const auto v1 = g.add_vertex("v1", EdgeFunction::of(EdgeKind::concat), {h, x});
    const auto v2 = g.add_vertex("v2", EdgeFunction::activation_fn(ActivationKind::sigmoid, "Wf"), {v1});
    const auto v3 = g.add_vertex("v3", EdgeFunction::of(EdgeKind::multiply), {c, v2});
    const auto v4 = g.add_vertex("v4", EdgeFunction::activation_fn(ActivationKind::sigmoid, "Wi"), {v1});
    const auto v5 = g.add_vertex("v5", EdgeFunction::activation_fn(ActivationKind::tanh, "Wc"), {v1});
    const auto v6 = g.add_vertex("v6", EdgeFunction::of(EdgeKind::multiply), {v4, v5});
    const auto v7 = g.add_vertex("v7", EdgeFunction::of(EdgeKind::add), {v3, v6});
    const auto v8 = g.add_vertex("v8", EdgeFunction::activation_fn(ActivationKind::sigmoid, "Wo"), {v1});
    const auto v9 = g.add_vertex("v9", EdgeFunction::activation_fn(ActivationKind::tanh), {v7});
    const auto v10 = g.add_vertex("v10", EdgeFunction::of(EdgeKind::multiply), {v8, v9});
    const auto y = g.add_vertex("y", EdgeFunction::activation_fn(ActivationKind::sigmoid, "Wy"), {v10});
    g.set_output(y);
    return g;
}

// Small convolutional classifier on a square single- or multi-channel image:
// valid convolution, tanh, flatten, linear head to 10 scores. tanh keeps the
// whole graph smooth, which the derivative checks rely on.
inline ComputationGraph build_conv_toy(std::size_t in_channels, std::size_t out_channels,
                                       std::size_t kernel, std::size_t image) {
    if (kernel > image) throw std::invalid_argument("build_conv_toy: kernel exceeds image");
    ComputationGraph g;
    const std::size_t feat = image - kernel + 1;
    g.add_param("K", Tensor({out_channels, in_channels, kernel, kernel}));
    g.add_param("Whead", Tensor({10, out_channels * feat * feat}));
    const auto img = g.add_input("image", in_channels == 1 ? Shape{image, image}
                                                           : Shape{in_channels, image, image});
    const auto conv = g.add_vertex("conv", EdgeFunction::conv("K"), {img});
    const auto act = g.add_vertex("act", EdgeFunction::activation_fn(ActivationKind::tanh), {conv});
    const auto flat = g.add_vertex("flat", EdgeFunction::of(EdgeKind::concat), {act});
    const auto head = g.add_vertex("head", EdgeFunction::linear("Whead"), {flat});
    g.set_output(head);
    return g;
}

// Draw every parameter of a graph from N(mean, variance), one stream for the
// whole graph in parameter-name order.
inline void init_params(ComputationGraph& g, double mean, double variance, RngSeed seed) {
    Rng rng(seed);
    for (const auto& [name, value] : g.params()) {
        g.set_param(name, gaussian_tensor(rng, value.shape(), mean, variance));
    }
}

// Scaled initialization: variance 1 / fan_in per weight matrix, which keeps
// deep forward passes at unit scale.
inline void init_params_scaled(ComputationGraph& g, RngSeed seed) {
    Rng rng(seed);
    for (const auto& [name, value] : g.params()) {
        const Shape& s = value.shape();
        std::size_t fan_in = 1;
        if (s.size() == 2) fan_in = s[1];
        if (s.size() == 4) fan_in = s[1] * s[2] * s[3];
        g.set_param(name, gaussian_tensor(rng, s, 0.0, 1.0 / static_cast<double>(fan_in)));
    }
}

}  // namespace freegrad
