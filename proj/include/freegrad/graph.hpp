// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Computation graphs: a DAG of tensor-valued vertices connected by edge
// functions, forward evaluation, and reference reverse-mode differentiation.
// The reverse pass here is the ground truth that the iterative schemes in the
// rest of the library are measured against; it is itself checked against
// finite differences in the test suite.

#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "freegrad/activation.hpp"
#include "freegrad/tensor.hpp"

namespace freegrad {

enum class EdgeKind {
    linear_map,
    elementwise_activation,
    add,
    multiply,
    concat,
    sqrt_op,
    tan_op,
    sin_op,
    square,
    conv2d,
    max_pool,
};

// One edge function. `param` names a tensor in the graph's parameter
// collection; it is required for linear_map and conv2d, optional for
// elementwise_activation (when present the edge computes f(W x) as a single
// step, which keeps gated architectures at one vertex per listed equation).
struct EdgeFunction {
    EdgeKind kind = EdgeKind::add;
    std::string param;
    ActivationKind activation = ActivationKind::identity;
    std::size_t pool = 2;  // max_pool window and stride

    static EdgeFunction linear(std::string param_name) {
        EdgeFunction f;
        f.kind = EdgeKind::linear_map;
        f.param = std::move(param_name);
        return f;
    }
    static EdgeFunction activation_fn(ActivationKind k, std::string param_name = "") {
        EdgeFunction f;
        f.kind = EdgeKind::elementwise_activation;
        f.activation = k;
        f.param = std::move(param_name);
        return f;
    }
    static EdgeFunction of(EdgeKind k) {
        EdgeFunction f;
        f.kind = k;
        return f;
    }
    static EdgeFunction conv(std::string param_name) {
        EdgeFunction f;
        f.kind = EdgeKind::conv2d;
        f.param = std::move(param_name);
        return f;
    }
    static EdgeFunction pooling(std::size_t window) {
        EdgeFunction f;
        f.kind = EdgeKind::max_pool;
        f.pool = window;
        return f;
    }
};

struct Vertex {
    std::string name;
    Shape shape;
    std::vector<std::size_t> parents;  // empty for input vertices
    EdgeFunction fn;

    bool is_input() const { return parents.empty(); }
};

class ComputationGraph {
public:
    std::size_t add_input(std::string name, Shape shape) {
        Vertex v;
        v.name = std::move(name);
        v.shape = std::move(shape);
        vertices_.push_back(std::move(v));
        return vertices_.size() - 1;
    }

    void add_param(const std::string& name, Tensor value) {
        if (params_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
        params_.emplace(name, std::move(value));
    }

    // Vertices must be appended in a valid topological order; referring only
    // to earlier vertices is what keeps the graph acyclic by construction.
    std::size_t add_vertex(std::string name, EdgeFunction fn, std::vector<std::size_t> parents) {
        if (parents.empty()) throw std::invalid_argument("computed vertex needs parents: " + name);
        for (std::size_t p : parents) {
            if (p >= vertices_.size()) {
                throw std::invalid_argument("vertex " + name + " references a later vertex");
            }
        }
        Vertex v;
        v.name = std::move(name);
        v.parents = std::move(parents);
        v.fn = std::move(fn);
        v.shape = infer_shape(v);
        vertices_.push_back(std::move(v));
        return vertices_.size() - 1;
    }

    void set_output(std::size_t id) {
        if (id >= vertices_.size()) throw std::invalid_argument("output id out of range");
        output_ = id;
    }

    std::size_t output() const {
        if (output_ == static_cast<std::size_t>(-1)) throw std::logic_error("graph output not set");
        return output_;
    }

    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t computed_count() const {
        std::size_t n = 0;
        for (const Vertex& v : vertices_)
            if (!v.is_input()) ++n;
        return n;
    }

    const Vertex& vertex(std::size_t id) const { return vertices_[id]; }
    const std::vector<Vertex>& vertices() const { return vertices_; }

    std::size_t find(const std::string& name) const {
        for (std::size_t i = 0; i < vertices_.size(); ++i)
            if (vertices_[i].name == name) return i;
        throw std::invalid_argument("no vertex named " + name);
    }

    const std::map<std::string, Tensor>& params() const { return params_; }
    const Tensor& param(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::invalid_argument("no parameter named " + name);
        return it->second;
    }
    void set_param(const std::string& name, Tensor value) {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::invalid_argument("no parameter named " + name);
        if (it->second.shape() != value.shape()) {
            throw std::invalid_argument("parameter shape change for " + name);
        }
        it->second = std::move(value);
    }

private:
    static Shape conv_input_shape(const Shape& s) {
        // Single-channel images may be stored rank-2.
        if (s.size() == 2) return {1, s[0], s[1]};
        if (s.size() == 3) return s;
        throw std::invalid_argument("conv expects a rank-2 or rank-3 image");
    }

    Shape infer_shape(const Vertex& v) const {
        const auto parent_shape = [&](std::size_t k) -> const Shape& {
            return vertices_[v.parents[k]].shape;
        };
        switch (v.fn.kind) {
            case EdgeKind::linear_map: {
                if (v.parents.size() != 1) throw std::invalid_argument("linear_map takes one parent");
                const Tensor& w = param(v.fn.param);
                if (w.cols() != shape_numel(parent_shape(0))) {
                    throw std::invalid_argument("linear_map dimension mismatch at " + v.name);
                }
                return {w.rows()};
            }
            case EdgeKind::elementwise_activation: {
                if (v.parents.size() != 1) throw std::invalid_argument("activation takes one parent");
                if (v.fn.param.empty()) return parent_shape(0);
                const Tensor& w = param(v.fn.param);
                if (w.cols() != shape_numel(parent_shape(0))) {
                    throw std::invalid_argument("activation premap mismatch at " + v.name);
                }
                return {w.rows()};
            }
            case EdgeKind::add: {
                if (v.parents.size() < 2) throw std::invalid_argument("add takes >= 2 parents");
                for (std::size_t k = 1; k < v.parents.size(); ++k) {
                    if (parent_shape(k) != parent_shape(0)) {
                        throw std::invalid_argument("add shape mismatch at " + v.name);
                    }
                }
                return parent_shape(0);
            }
            case EdgeKind::multiply: {
                if (v.parents.size() != 2) throw std::invalid_argument("multiply takes two parents");
                if (parent_shape(0) != parent_shape(1)) {
                    throw std::invalid_argument("multiply shape mismatch at " + v.name);
                }
                return parent_shape(0);
            }
            case EdgeKind::concat: {
                std::size_t n = 0;
                for (std::size_t k = 0; k < v.parents.size(); ++k) n += shape_numel(parent_shape(k));
                return {n};
            }
            case EdgeKind::sqrt_op:
            case EdgeKind::tan_op:
            case EdgeKind::sin_op:
            case EdgeKind::square: {
                if (v.parents.size() != 1) throw std::invalid_argument("unary edge takes one parent");
                return parent_shape(0);
            }
            case EdgeKind::conv2d: {
                if (v.parents.size() != 1) throw std::invalid_argument("conv2d takes one parent");
                const Shape in = conv_input_shape(parent_shape(0));
                const Tensor& k = param(v.fn.param);
                if (k.rank() != 4) throw std::invalid_argument("conv kernel must be rank 4");
                const Shape& ks = k.shape();
                if (ks[1] != in[0] || ks[2] > in[1] || ks[3] > in[2]) {
                    throw std::invalid_argument("conv kernel does not fit image at " + v.name);
                }
                return {ks[0], in[1] - ks[2] + 1, in[2] - ks[3] + 1};
            }
            case EdgeKind::max_pool: {
                if (v.parents.size() != 1) throw std::invalid_argument("max_pool takes one parent");
                const Shape in = conv_input_shape(parent_shape(0));
                const std::size_t p = v.fn.pool;
                if (p == 0 || in[1] % p || in[2] % p) {
                    throw std::invalid_argument("pool window must divide image at " + v.name);
                }
                return {in[0], in[1] / p, in[2] / p};
            }
        }
        throw std::logic_error("unhandled edge kind");
    }

    std::vector<Vertex> vertices_;
    std::map<std::string, Tensor> params_;
    std::size_t output_ = static_cast<std::size_t>(-1);
};

namespace detail {

inline void conv_dims(const Shape& s, std::size_t& c, std::size_t& h, std::size_t& w) {
    if (s.size() == 2) {
        c = 1;
        h = s[0];
        w = s[1];
    } else {
        c = s[0];
        h = s[1];
        w = s[2];
    }
}

inline Tensor conv_forward(const Tensor& x, const Tensor& k) {
    std::size_t ci, h, w;
    conv_dims(x.shape(), ci, h, w);
    const std::size_t co = k.shape()[0], kh = k.shape()[2], kw = k.shape()[3];
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;
    Tensor y({co, oh, ow});
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t a = 0; a < kh; ++a)
                for (std::size_t b = 0; b < kw; ++b) {
                    const double kv = k[((o * ci + c) * kh + a) * kw + b];
                    if (kv == 0.0) continue;
                    for (std::size_t i = 0; i < oh; ++i) {
                        const double* xr = x.data() + (c * h + i + a) * w + b;
                        double* yr = y.data() + (o * oh + i) * ow;
                        for (std::size_t j = 0; j < ow; ++j) yr[j] += kv * xr[j];
                    }
                }
    return y;
}

// Gradients of the valid correlation above. The image gradient is the
// adjoint correlated with the flipped kernel after zero padding by
// (kernel - 1) on each side; written here index-wise, which is the same
// thing without materializing the padding.
inline void conv_backward(const Tensor& x, const Tensor& k, const Tensor& adj, Tensor& dx,
                          Tensor* dk) {
    std::size_t ci, h, w;
    conv_dims(x.shape(), ci, h, w);
    const std::size_t co = k.shape()[0], kh = k.shape()[2], kw = k.shape()[3];
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t a = 0; a < kh; ++a)
                for (std::size_t b = 0; b < kw; ++b) {
                    const double kv = k[((o * ci + c) * kh + a) * kw + b];
                    double dkv = 0.0;
                    for (std::size_t i = 0; i < oh; ++i) {
                        const double* ar = adj.data() + (o * oh + i) * ow;
                        const double* xr = x.data() + (c * h + i + a) * w + b;
                        double* dxr = dx.data() + (c * h + i + a) * w + b;
                        for (std::size_t j = 0; j < ow; ++j) {
                            dxr[j] += kv * ar[j];
                            dkv += ar[j] * xr[j];
                        }
                    }
                    if (dk) (*dk)[((o * ci + c) * kh + a) * kw + b] += dkv;
                }
}

inline Tensor pool_forward(const Tensor& x, std::size_t p) {
    std::size_t c, h, w;
    conv_dims(x.shape(), c, h, w);
    Tensor y({c, h / p, w / p});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h / p; ++i)
            for (std::size_t j = 0; j < w / p; ++j) {
                double best = x[(ch * h + i * p) * w + j * p];
                for (std::size_t a = 0; a < p; ++a)
                    for (std::size_t b = 0; b < p; ++b) {
                        best = std::max(best, x[(ch * h + i * p + a) * w + j * p + b]);
                    }
                y[(ch * (h / p) + i) * (w / p) + j] = best;
            }
    return y;
}

inline void pool_backward(const Tensor& x, std::size_t p, const Tensor& adj, Tensor& dx) {
    std::size_t c, h, w;
    conv_dims(x.shape(), c, h, w);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h / p; ++i)
            for (std::size_t j = 0; j < w / p; ++j) {
                // Ties route to the first maximum in row-major order.
                std::size_t arg = (ch * h + i * p) * w + j * p;
                double best = x[arg];
                for (std::size_t a = 0; a < p; ++a)
                    for (std::size_t b = 0; b < p; ++b) {
                        const std::size_t idx = (ch * h + i * p + a) * w + j * p + b;
                        if (x[idx] > best) {
                            best = x[idx];
                            arg = idx;
                        }
                    }
                dx[arg] += adj[(ch * (h / p) + i) * (w / p) + j];
            }
}

}  // namespace detail

// Value of one computed vertex from its parents' values.
inline Tensor eval_vertex(const ComputationGraph& g, std::size_t id,
                          const std::vector<Tensor>& values) {
    const Vertex& v = g.vertex(id);
    const auto parent = [&](std::size_t k) -> const Tensor& { return values[v.parents[k]]; };
    switch (v.fn.kind) {
        case EdgeKind::linear_map:
            return matmul(g.param(v.fn.param), parent(0));
        case EdgeKind::elementwise_activation: {
            if (v.fn.param.empty()) return activation_apply(v.fn.activation, parent(0));
            return activation_apply(v.fn.activation, matmul(g.param(v.fn.param), parent(0)));
        }
        case EdgeKind::add: {
            Tensor out = parent(0);
            for (std::size_t k = 1; k < v.parents.size(); ++k) out += parent(k);
            return out;
        }
        case EdgeKind::multiply:
            return hadamard(parent(0), parent(1));
        case EdgeKind::concat: {
            Tensor out(v.shape);
            std::size_t at = 0;
            for (std::size_t k = 0; k < v.parents.size(); ++k) {
                const Tensor& p = parent(k);
                for (std::size_t i = 0; i < p.size(); ++i) out[at++] = p[i];
            }
            return out;
        }
        case EdgeKind::sqrt_op: {
            Tensor out(v.shape);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(parent(0)[i]);
            ensure_finite(out, v.name.c_str());
            return out;
        }
        case EdgeKind::tan_op: {
            Tensor out(v.shape);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tan(parent(0)[i]);
            ensure_finite(out, v.name.c_str());
            return out;
        }
        case EdgeKind::sin_op: {
            Tensor out(v.shape);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sin(parent(0)[i]);
            return out;
        }
        case EdgeKind::square: {
            Tensor out(v.shape);
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = parent(0)[i] * parent(0)[i];
            }
            return out;
        }
        case EdgeKind::conv2d:
            return detail::conv_forward(parent(0), g.param(v.fn.param));
        case EdgeKind::max_pool:
            return detail::pool_forward(parent(0), v.fn.pool);
    }
    throw std::logic_error("unhandled edge kind");
}

inline std::vector<Tensor> forward(const ComputationGraph& g,
                                   const std::map<std::string, Tensor>& inputs) {
    std::vector<Tensor> values(g.vertex_count());
    for (std::size_t id = 0; id < g.vertex_count(); ++id) {
        const Vertex& v = g.vertex(id);
        if (v.is_input()) {
            auto it = inputs.find(v.name);
            if (it == inputs.end()) throw std::invalid_argument("unbound input: " + v.name);
            if (shape_numel(it->second.shape()) != shape_numel(v.shape)) {
                throw std::invalid_argument("input shape mismatch at " + v.name);
            }
            values[id] = it->second;
        } else {
            values[id] = eval_vertex(g, id, values);
        }
    }
    return values;
}

// Pull `adj` (the sensitivity of some scalar to vertex `id`) back through the
// vertex's edge function: parents accumulate their share in vertex_accum, and
// the edge's parameter, if any, accumulates into *param_accum when non-null.
// This single routine serves both the reverse-mode pass and the iterative
// schemes that need Jacobian-transpose products at frozen values.
inline void edge_vjp(const ComputationGraph& g, std::size_t id, const std::vector<Tensor>& values,
                     const Tensor& adj, std::vector<Tensor>& vertex_accum,
                     std::map<std::string, Tensor>* param_accum) {
    const Vertex& v = g.vertex(id);
    const auto parent_val = [&](std::size_t k) -> const Tensor& { return values[v.parents[k]]; };
    const auto accum = [&](std::size_t k) -> Tensor& { return vertex_accum[v.parents[k]]; };
    const auto param_slot = [&](const std::string& name) -> Tensor* {
        if (!param_accum) return nullptr;
        auto it = param_accum->find(name);
        if (it == param_accum->end()) {
            it = param_accum->emplace(name, Tensor(g.param(name).shape())).first;
        }
        return &it->second;
    };
    switch (v.fn.kind) {
        case EdgeKind::linear_map: {
            const Tensor& w = g.param(v.fn.param);
            accum(0) += matmul(transpose(w), adj);
            if (Tensor* dw = param_slot(v.fn.param)) *dw += outer(adj, parent_val(0));
            return;
        }
        case EdgeKind::elementwise_activation: {
            if (v.fn.param.empty()) {
                accum(0) += hadamard(activation_deriv(v.fn.activation, parent_val(0)), adj);
                return;
            }
            const Tensor& w = g.param(v.fn.param);
            const Tensor pre = matmul(w, parent_val(0));
            const Tensor gated = hadamard(activation_deriv(v.fn.activation, pre), adj);
            accum(0) += matmul(transpose(w), gated);
            if (Tensor* dw = param_slot(v.fn.param)) *dw += outer(gated, parent_val(0));
            return;
        }
        case EdgeKind::add: {
            for (std::size_t k = 0; k < v.parents.size(); ++k) accum(k) += adj;
            return;
        }
        case EdgeKind::multiply: {
            accum(0) += hadamard(parent_val(1), adj);
            accum(1) += hadamard(parent_val(0), adj);
            return;
        }
        case EdgeKind::concat: {
            std::size_t at = 0;
            for (std::size_t k = 0; k < v.parents.size(); ++k) {
                Tensor& acc = accum(k);
                for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += adj[at++];
            }
            return;
        }
        case EdgeKind::sqrt_op: {
            Tensor& acc = accum(0);
            const Tensor& y = values[id];
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += adj[i] * 0.5 / y[i];
            return;
        }
        case EdgeKind::tan_op: {
            Tensor& acc = accum(0);
            const Tensor& y = values[id];
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += adj[i] * (1.0 + y[i] * y[i]);
            return;
        }
        case EdgeKind::sin_op: {
            Tensor& acc = accum(0);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                acc[i] += adj[i] * std::cos(parent_val(0)[i]);
            }
            return;
        }
        case EdgeKind::square: {
            Tensor& acc = accum(0);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                acc[i] += adj[i] * 2.0 * parent_val(0)[i];
            }
            return;
        }
        case EdgeKind::conv2d: {
            detail::conv_backward(parent_val(0), g.param(v.fn.param), adj, accum(0),
                                  param_slot(v.fn.param));
            return;
        }
        case EdgeKind::max_pool: {
            detail::pool_backward(parent_val(0), v.fn.pool, adj, accum(0));
            return;
        }
    }
    throw std::logic_error("unhandled edge kind");
}

struct AdjointTape {
    std::vector<Tensor> values;
    std::vector<Tensor> adjoints;
    std::map<std::string, Tensor> param_grads;
};

// Reverse-mode differentiation from precomputed forward values. Vertices are
// visited in reverse topological order, so multi-path contributions sum in a
// fixed sequence and repeated runs are bit-identical.
inline AdjointTape reverse_ad_from_values(const ComputationGraph& g, std::vector<Tensor> values,
                                          const Tensor& loss_grad) {
    if (values.size() != g.vertex_count()) {
        throw std::invalid_argument("reverse_ad: forward values missing");
    }
    AdjointTape tape;
    tape.values = std::move(values);
    tape.adjoints.reserve(g.vertex_count());
    for (std::size_t id = 0; id < g.vertex_count(); ++id) {
        tape.adjoints.emplace_back(g.vertex(id).shape);
    }
    for (const auto& [name, value] : g.params()) {
        tape.param_grads.emplace(name, Tensor(value.shape()));
    }
    if (loss_grad.size() != shape_numel(g.vertex(g.output()).shape)) {
        throw std::invalid_argument("loss gradient shape does not match the output vertex");
    }
    Tensor& seed = tape.adjoints[g.output()];
    for (std::size_t i = 0; i < seed.size(); ++i) seed[i] = loss_grad[i];
    for (std::size_t id = g.vertex_count(); id-- > 0;) {
        if (g.vertex(id).is_input()) continue;
        edge_vjp(g, id, tape.values, tape.adjoints[id], tape.adjoints, &tape.param_grads);
    }
    return tape;
}

inline AdjointTape reverse_ad(const ComputationGraph& g, const std::map<std::string, Tensor>& inputs,
                              const Tensor& loss_grad) {
    return reverse_ad_from_values(g, forward(g, inputs), loss_grad);
}

}  // namespace freegrad
