// Copyright (c) 2026, the freegrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Small numeric utilities: finite-difference gradients (the reference every
// analytic derivative in this library is checked against), gradient angles,
// and a dense linear solver for the covariance work in the filtering module.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "freegrad/tensor.hpp"

namespace freegrad {

// Central differences, elementwise. Throws if the function returns a
// non-finite value anywhere on the stencil.
inline Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                         const Tensor& x, double h = 1e-5) {
    if (h <= 0.0) throw std::invalid_argument("finite_difference_gradient: h must be positive");
    Tensor g(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        probe[i] = xi + h;
        const double fp = f(probe);
        probe[i] = xi - h;
        const double fm = f(probe);
        probe[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::domain_error("finite_difference_gradient: non-finite function value");
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Angle between two gradients in degrees, computed on the flattened values.
// Zero-norm inputs have no direction, so they are rejected.
inline double gradient_angle(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("gradient_angle length mismatch: " + shape_to_string(a.shape()) +
                                    " vs " + shape_to_string(b.shape()));
    }
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw std::domain_error("gradient_angle: zero-norm input has no direction");
    }
    double c = dot(a, b) / (na * nb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return std::acos(c) * 180.0 / std::numbers::pi;
}

// Largest elementwise difference between two tensors, scaled by the largest
// magnitude present in either. Used for gradient agreement checks where the
// compared values share a common scale.
inline double relative_max_error(const Tensor& a, const Tensor& b) {
    const double scale = std::max({max_abs(a), max_abs(b), 1e-8});
    return max_abs_diff(a, b) / scale;
}

// Solve A x = b by Gaussian elimination with partial pivoting. A tiny
// diagonal jitter keeps positive semidefinite covariance solves well posed.
inline Tensor linear_solve(Tensor a, Tensor b, double jitter = 0.0) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("linear_solve: matrix not square");
    if (b.rows() != n) throw std::invalid_argument("linear_solve: rhs rows disagree");
    const std::size_t m = b.cols();
    if (jitter != 0.0) {
        for (std::size_t i = 0; i < n; ++i) a.at(i, i) += jitter;
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(a.at(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(a.at(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best == 0.0) throw std::domain_error("linear_solve: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(piv, j));
            for (std::size_t j = 0; j < m; ++j) std::swap(b.at(col, j), b.at(piv, j));
        }
        const double d = a.at(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a.at(r, col) / d;
            if (factor == 0.0) continue;
            a.at(r, col) = 0.0;
            for (std::size_t j = col + 1; j < n; ++j) a.at(r, j) -= factor * a.at(col, j);
            for (std::size_t j = 0; j < m; ++j) b.at(r, j) -= factor * b.at(col, j);
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        const double d = a.at(col, col);
        for (std::size_t j = 0; j < m; ++j) {
            double s = b.at(col, j);
            for (std::size_t k = col + 1; k < n; ++k) s -= a.at(col, k) * b.at(k, j);
            b.at(col, j) = s / d;
        }
    }
    ensure_finite(b, "linear_solve");
    return b;
}

inline Tensor matrix_inverse(const Tensor& a, double jitter = 0.0) {
    return linear_solve(a, Tensor::identity(a.rows()), jitter);
}

// Average away the antisymmetric part. Covariance recursions accumulate
// round-off asymmetry that this clips back out each step.
inline Tensor symmetrize(const Tensor& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("symmetrize: matrix not square");
    Tensor s(a.shape());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            s.at(i, j) = 0.5 * (a.at(i, j) + a.at(j, i));
        }
    }
    return s;
}

// Cholesky factorization; returns false when the matrix is not positive
// definite. L is lower triangular with A = L L^T.
inline bool cholesky_factor(const Tensor& a, Tensor& l) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("cholesky_factor: matrix not square");
    l = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 0.0) return false;
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return true;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
// Good to near machine precision for the small covariance matrices used here.
inline std::vector<double> symmetric_eigenvalues(const Tensor& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("symmetric_eigenvalues: matrix not square");
    Tensor m = symmetrize(a);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
        }
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m.at(p, q);
                if (apq == 0.0) continue;
                const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m.at(k, p);
                    const double mkq = m.at(k, q);
                    m.at(k, p) = c * mkp - s * mkq;
                    m.at(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m.at(p, k);
                    const double mqk = m.at(q, k);
                    m.at(p, k) = c * mpk - s * mqk;
                    m.at(q, k) = s * mpk + c * mqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = m.at(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace freegrad
