// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference computations for the tests. Nothing here calls the
// library's contraction or reconstruction routines.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "trnn/tensor.hpp"

namespace trnn::oracle {

/// Visits every multi-index of `shape` in row-major order.
inline void for_each_index(const Shape& shape, const std::function<void(const Shape&)>& fn) {
    Shape sub(shape.size(), 0);
    Index total = 1;
    for (Index s : shape) total *= s;
    for (Index n = 0; n < total; ++n) {
        fn(sub);
        for (std::size_t k = shape.size(); k-- > 0;) {
            if (++sub[k] < shape[k]) break;
            sub[k] = 0;
        }
    }
}

inline Index offset(const Shape& shape, const Shape& sub) {
    Index off = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) off = off * shape[k] + sub[k];
    return off;
}

/// Element-wise definition of pairwise contraction by nested summation.
inline Tensor contract(const Tensor& a, const Tensor& b, const Shape& axes_a, const Shape& axes_b) {
    Shape free_a, free_b, out_shape, matched;
    for (Index k = 0; k < a.order(); ++k)
        if (std::find(axes_a.begin(), axes_a.end(), k) == axes_a.end()) free_a.push_back(k);
    for (Index k = 0; k < b.order(); ++k)
        if (std::find(axes_b.begin(), axes_b.end(), k) == axes_b.end()) free_b.push_back(k);
    for (Index k : free_a) out_shape.push_back(a.dim(k));
    for (Index k : free_b) out_shape.push_back(b.dim(k));
    for (Index k : axes_a) matched.push_back(a.dim(k));
    Tensor out(out_shape);
    for_each_index(out_shape, [&](const Shape& o) {
        double s = 0;
        for_each_index(matched, [&](const Shape& p) {
            Shape sa(static_cast<std::size_t>(a.order())), sb(static_cast<std::size_t>(b.order()));
            for (std::size_t i = 0; i < free_a.size(); ++i) sa[static_cast<std::size_t>(free_a[i])] = o[i];
            for (std::size_t i = 0; i < free_b.size(); ++i)
                sb[static_cast<std::size_t>(free_b[i])] = o[free_a.size() + i];
            for (std::size_t i = 0; i < matched.size(); ++i) {
                sa[static_cast<std::size_t>(axes_a[i])] = p[i];
                sb[static_cast<std::size_t>(axes_b[i])] = p[i];
            }
            s += a.data()[offset(a.shape(), sa)] * b.data()[offset(b.shape(), sb)];
        });
        out.data()[offset(out_shape, o)] = s;
    });
    return out;
}

/// Ring element as a d-fold nested sum over all rank indices.
inline double ring_element(const std::vector<Tensor>& cores, const Shape& modes) {
    const std::size_t d = cores.size();
    Shape ranks;
    for (const auto& c : cores) ranks.push_back(c.dim(0));
    double total = 0;
    for_each_index(ranks, [&](const Shape& r) {
        double p = 1;
        for (std::size_t k = 0; k < d; ++k)
            p *= cores[k].data()[offset(cores[k].shape(), {r[k], modes[k], r[(k + 1) % d]})];
        total += p;
    });
    return total;
}

inline Tensor ring_dense(const std::vector<Tensor>& cores) {
    Shape dims;
    for (const auto& c : cores) dims.push_back(c.dim(1));
    Tensor out(dims);
    for_each_index(dims, [&](const Shape& l) { out.data()[offset(dims, l)] = ring_element(cores, l); });
    return out;
}

inline Eigen::MatrixXd triple_loop_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.rows(), b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < b.cols(); ++j)
            for (Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
    return c;
}

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    return Tensor::Random(shape, rng, dist);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

/// Central difference of `f` with respect to `x[i]`, restoring `x[i]` afterwards.
template <typename F>
double central_difference(F&& f, double& xi, double eps) {
    const double saved = xi;
    xi = saved + eps;
    const double up = f();
    xi = saved - eps;
    const double down = f();
    xi = saved;
    return (up - down) / (2 * eps);
}

}  // namespace trnn::oracle
