// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensor of 64-bit floats plus the small set of linear
// algebra primitives the rest of the library is built on.

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace freegrad {

using Shape = std::vector<std::size_t>;

inline std::string shape_to_string(const Shape& s) {
    std::ostringstream out;
    out << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out << "x";
        out << s[i];
    }
    out << ")";
    return out.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_)) {
            throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_to_string(shape_));
        }
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // 2-D accessors; rank-1 tensors count as single-column matrices.
    std::size_t rows() const { return rank() == 0 ? 0 : shape_[0]; }
    std::size_t cols() const {
        if (rank() <= 1) return rank() == 1 ? 1 : 0;
        return shape_[1];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor& operator+=(const Tensor& o) {
        check_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Tensor& operator-=(const Tensor& o) {
        check_same_shape(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Tensor& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }

private:
    void check_same_shape(const Tensor& o, const char* op) const {
        if (!same_shape(o)) {
            throw std::invalid_argument(std::string("shape mismatch in ") + op + ": " +
                                        shape_to_string(shape_) + " vs " + shape_to_string(o.shape_));
        }
    }

    Shape shape_;
    std::vector<double> data_;
};

inline Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
inline Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
inline Tensor operator*(Tensor a, double s) { return a *= s; }
inline Tensor operator*(double s, Tensor a) { return a *= s; }

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("shape mismatch in hadamard: " + shape_to_string(a.shape()) +
                                    " vs " + shape_to_string(b.shape()));
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

inline void ensure_finite(const Tensor& t, const char* context) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i])) {
            throw std::domain_error(std::string("non-finite value in ") + context + " at index " +
                                    std::to_string(i));
        }
    }
}

// Matrix product. Rank-1 operands are treated as single-column matrices, and
// the result collapses back to rank 1 when the right operand was a vector.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() > 2 || b.rank() > 2 || a.rank() == 0 || b.rank() == 0) {
        throw std::invalid_argument("matmul expects rank-1 or rank-2 operands, got " +
                                    shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) {
        throw std::invalid_argument("matmul inner dimensions disagree: " +
                                    shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
    }
    Tensor out(b.rank() == 1 ? Shape{m} : Shape{m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
    // Blocked over rows and output columns with local accumulators, so each
    // B row is reused across a row block and C is written once. Per output
    // element the additions still run in ascending k order with the same
    // zero skip, so results are bit-identical to the naive triple loop.
    constexpr std::size_t jtile = 256;
    constexpr std::size_t itile = 4;
    double acc[itile][jtile];
    for (std::size_t j0 = 0; j0 < n; j0 += jtile) {
        const std::size_t jn = std::min(jtile, n - j0);
        for (std::size_t i0 = 0; i0 < m; i0 += itile) {
            const std::size_t in = std::min(itile, m - i0);
            for (std::size_t r = 0; r < in; ++r) std::fill(acc[r], acc[r] + jn, 0.0);
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double* brow = pb + kk * n + j0;
                for (std::size_t r = 0; r < in; ++r) {
                    const double aik = pa[(i0 + r) * k + kk];
                    if (aik == 0.0) continue;
                    double* arow = acc[r];
                    for (std::size_t j = 0; j < jn; ++j) arow[j] += aik * brow[j];
                }
            }
            for (std::size_t r = 0; r < in; ++r) {
                double* crow = pc + (i0 + r) * n + j0;
                for (std::size_t j = 0; j < jn; ++j) crow[j] = acc[r][j];
            }
        }
    }
    ensure_finite(out, "matmul");
    return out;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() > 2) {
        throw std::invalid_argument("transpose expects rank <= 2, got " + shape_to_string(a.shape()));
    }
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

// a b^T for vectors; the usual rank-1 update building block.
inline Tensor outer(const Tensor& a, const Tensor& b) {
    Tensor out({a.size(), b.size()});
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out.at(i, j) = a[i] * b[j];
    return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot length mismatch: " + shape_to_string(a.shape()) + " vs " +
                                    shape_to_string(b.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(const Tensor& a) { return dot(a, a); }
inline double norm(const Tensor& a) { return std::sqrt(squared_norm(a)); }

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("max_abs_diff length mismatch: " + shape_to_string(a.shape()) +
                                    " vs " + shape_to_string(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace freegrad
