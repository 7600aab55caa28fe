// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "trnn/tensor.hpp"

namespace trnn {

class FormatError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

template <typename Scalar>
void check_cores(const std::vector<DenseTensor<Scalar>>& cores, bool ring) {
    if (cores.empty()) throw FormatError("core chain must hold at least one core");
    for (std::size_t k = 0; k < cores.size(); ++k)
        if (cores[k].order() != 3)
            throw FormatError("core " + std::to_string(k) + " is not 3-order: " +
                              to_string(cores[k].shape()));
    for (std::size_t k = 0; k + 1 < cores.size(); ++k)
        if (cores[k].dim(2) != cores[k + 1].dim(0))
            throw FormatError("rank mismatch between cores " + std::to_string(k) + " and " +
                              std::to_string(k + 1) + ": " + to_string(cores[k].shape()) + " vs " +
                              to_string(cores[k + 1].shape()));
    if (ring) {
        if (cores.back().dim(2) != cores.front().dim(0))
            throw FormatError("ring closure mismatch: last core right rank " +
                              std::to_string(cores.back().dim(2)) + " != first core left rank " +
                              std::to_string(cores.front().dim(0)));
    } else if (cores.front().dim(0) != 1 || cores.back().dim(2) != 1) {
        throw FormatError("tensor train border ranks must be 1");
    }
}

template <typename Scalar>
Index stored_scalars(const std::vector<DenseTensor<Scalar>>& cores) {
    Index n = 0;
    for (const auto& c : cores) n += c.size();
    return n;
}

}  // namespace detail

/// Tensor train: open chain of cores [R_{k-1}, L_k, R_k] with R_0 = R_d = 1.
template <typename Scalar>
class TTFormat {
public:
    using Core = DenseTensor<Scalar>;

    TTFormat() = default;
    explicit TTFormat(std::vector<Core> cores) : cores_(std::move(cores)) {
        detail::check_cores(cores_, false);
    }

    Index order() const { return static_cast<Index>(cores_.size()); }
    const std::vector<Core>& cores() const { return cores_; }
    const Core& core(Index k) const { return cores_.at(static_cast<std::size_t>(k)); }
    typename Core::Storage& core_data(Index k) { return cores_.at(static_cast<std::size_t>(k)).data(); }

    Shape dims() const {
        Shape d;
        for (const auto& c : cores_) d.push_back(c.dim(1));
        return d;
    }
    /// [R_0, ..., R_d].
    std::vector<Index> ranks() const {
        std::vector<Index> r;
        for (const auto& c : cores_) r.push_back(c.dim(0));
        r.push_back(cores_.back().dim(2));
        return r;
    }
    Index param_count() const { return detail::stored_scalars(cores_); }

private:
    std::vector<Core> cores_;
};

/// Tensor ring: cores [R_{k-1}, L_k, R_k] closed by R_d == R_0.
template <typename Scalar>
class TRFormat {
public:
    using Core = DenseTensor<Scalar>;

    TRFormat() = default;
    explicit TRFormat(std::vector<Core> cores) : cores_(std::move(cores)) {
        detail::check_cores(cores_, true);
    }
    /// A train is a ring whose closing rank is 1.
    explicit TRFormat(const TTFormat<Scalar>& tt) : TRFormat(tt.cores()) {}

    Index order() const { return static_cast<Index>(cores_.size()); }
    const std::vector<Core>& cores() const { return cores_; }
    const Core& core(Index k) const { return cores_.at(static_cast<std::size_t>(k)); }
    typename Core::Storage& core_data(Index k) { return cores_.at(static_cast<std::size_t>(k)).data(); }

    Shape dims() const {
        Shape d;
        for (const auto& c : cores_) d.push_back(c.dim(1));
        return d;
    }
    /// [R_0, ..., R_{d-1}]; the closing rank R_d equals R_0.
    std::vector<Index> ranks() const {
        std::vector<Index> r;
        for (const auto& c : cores_) r.push_back(c.dim(0));
        return r;
    }
    Index param_count() const { return detail::stored_scalars(cores_); }

private:
    std::vector<Core> cores_;
};

template <typename Scalar>
Index param_count(const TRFormat<Scalar>& f) {
    return f.param_count();
}
template <typename Scalar>
Index param_count(const TTFormat<Scalar>& f) {
    return f.param_count();
}

template <typename Scalar>
DenseTensor<Scalar> tt_reconstruct(const TTFormat<Scalar>& f) {
    auto t = f.core(0);
    for (Index k = 1; k < f.order(); ++k) t = contract(t, f.core(k), {t.order() - 1}, {0});
    return t.reshaped(f.dims());
}

/// Dense tensor of a ring: left-to-right contraction, closing rank traced at the last step.
template <typename Scalar>
DenseTensor<Scalar> tr_reconstruct(const TRFormat<Scalar>& f) {
    if (f.order() == 1) return trace(f.core(0), 0, 2);
    auto t = f.core(0);
    for (Index k = 1; k + 1 < f.order(); ++k) t = contract(t, f.core(k), {t.order() - 1}, {0});
    return contract(t, f.core(f.order() - 1), {0, t.order() - 1}, {2, 0});
}

/// Splits a ring of closing rank R into R trains by fixing r_0 = r_d = k.
template <typename Scalar>
std::vector<TTFormat<Scalar>> tr_as_tt_sum(const TRFormat<Scalar>& f) {
    const Index closing = f.core(0).dim(0);
    std::vector<TTFormat<Scalar>> trains;
    trains.reserve(static_cast<std::size_t>(closing));
    for (Index k = 0; k < closing; ++k) {
        std::vector<DenseTensor<Scalar>> cores(f.cores());
        cores.front() = slice(cores.front(), 0, k);
        cores.back() = slice(cores.back(), 2, k);
        trains.emplace_back(std::move(cores));
    }
    return trains;
}

/// Ring with the starting core moved `shift` positions forward (cyclic relabeling).
template <typename Scalar>
TRFormat<Scalar> rotate_ring(const TRFormat<Scalar>& f, Index shift) {
    const Index d = f.order();
    std::vector<DenseTensor<Scalar>> cores;
    for (Index k = 0; k < d; ++k) cores.push_back(f.core(((k + shift) % d + d) % d));
    return TRFormat<Scalar>(std::move(cores));
}

/// Dense-to-factorized ratio Π L_k / Σ|core_k|. The cores must split into a
/// prefix whose dims multiply to `dense_in` and a suffix multiplying to `dense_out`.
template <typename Scalar>
double compression_ratio(Index dense_in, Index dense_out, const TRFormat<Scalar>& f) {
    const Shape dims = f.dims();
    Index prefix = 1;
    bool split_found = false;
    for (std::size_t n = 0; n <= dims.size() && !split_found; ++n) {
        if (n > 0) prefix *= dims[n - 1];
        if (prefix == dense_in &&
            volume(std::span<const Index>(dims.data() + n, dims.size() - n)) == dense_out)
            split_found = true;
    }
    if (!split_found)
        throw FormatError("compression_ratio: core dims " + to_string(dims) + " do not factor " +
                          std::to_string(dense_in) + " x " + std::to_string(dense_out));
    return static_cast<double>(dense_in) * static_cast<double>(dense_out) /
           static_cast<double>(f.param_count());
}

/// Seeded Gaussian ring with cores [ranks[k], dims[k], ranks[(k+1) % d]].
///
/// Core k has standard deviation sqrt(v^(1/d) / R_{k+1}). Every reconstructed
/// element is a sum of Π R_k independent path products, so its variance is
/// exactly `target_variance` regardless of d or the ranks.
template <typename Scalar = double>
TRFormat<Scalar> random_tr(const Shape& dims, const std::vector<Index>& ranks, std::uint64_t seed,
                           double target_variance = 1.0) {
    if (dims.empty() || dims.size() != ranks.size())
        throw FormatError("random_tr: need one rank per core (got " + std::to_string(ranks.size()) +
                          " ranks for " + std::to_string(dims.size()) + " cores)");
    const auto d = dims.size();
    std::mt19937_64 rng(seed);
    std::vector<DenseTensor<Scalar>> cores;
    const double per_core = std::pow(target_variance, 1.0 / static_cast<double>(d));
    for (std::size_t k = 0; k < d; ++k) {
        const Index right = ranks[(k + 1) % d];
        std::normal_distribution<double> dist(0.0, std::sqrt(per_core / static_cast<double>(right)));
        cores.push_back(DenseTensor<Scalar>::Random({ranks[k], dims[k], right}, rng, dist));
    }
    return TRFormat<Scalar>(std::move(cores));
}

/// Exact ring (closing rank 1) for any dense tensor: each core forwards the
/// multi-index seen so far through its right rank and the last core holds the values.
template <typename Scalar>
TRFormat<Scalar> tr_embed_dense(const DenseTensor<Scalar>& t) {
    const Shape& dims = t.shape();
    if (dims.empty()) throw FormatError("tr_embed_dense: order-0 tensor");
    std::vector<DenseTensor<Scalar>> cores;
    Index left = 1;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseTensor<Scalar> c({left, dims[k], left * dims[k]});
        for (Index p = 0; p < left; ++p)
            for (Index l = 0; l < dims[k]; ++l) c(p, l, p * dims[k] + l) = Scalar{1};
        cores.push_back(std::move(c));
        left *= dims[k];
    }
    cores.push_back(t.reshaped({left, dims.back(), 1}));
    return TRFormat<Scalar>(std::move(cores));
}

/// Gradient of <grad, tr_reconstruct(f)> with respect to every core.
///
/// For core k the remaining ring (cores k+1, ..., k-1) is contracted into an
/// open chain and paired with the cyclically rotated dense gradient.
template <typename Scalar>
std::vector<DenseTensor<Scalar>> tr_reconstruct_vjp(const TRFormat<Scalar>& f,
                                                    const DenseTensor<Scalar>& grad) {
    const Index d = f.order();
    if (grad.shape() != f.dims())
        throw ShapeError("tr_reconstruct_vjp: gradient shape " + to_string(grad.shape()) +
                         " does not match " + to_string(f.dims()));
    std::vector<DenseTensor<Scalar>> out;
    out.reserve(static_cast<std::size_t>(d));
    if (d == 1) {
        const Index r = f.core(0).dim(0), n = f.core(0).dim(1);
        DenseTensor<Scalar> g({r, n, r});
        for (Index a = 0; a < r; ++a)
            for (Index l = 0; l < n; ++l) g(a, l, a) = grad.data()[l];
        out.push_back(std::move(g));
        return out;
    }
    for (Index k = 0; k < d; ++k) {
        auto env = f.core((k + 1) % d);
        for (Index j = 2; j < d; ++j) env = contract(env, f.core((k + j) % d), {env.order() - 1}, {0});
        Shape rot(static_cast<std::size_t>(d)), inner_g, inner_e;
        for (Index j = 0; j < d; ++j) rot[static_cast<std::size_t>(j)] = (k + j) % d;
        for (Index j = 1; j < d; ++j) {
            inner_g.push_back(j);
            inner_e.push_back(j);
        }
        const auto rotated = permute(grad, rot);
        const auto g = contract(rotated, env, inner_g, inner_e);  // [L_k, R_{k+1}, R_k]
        out.push_back(permute(g, {2, 0, 1}));
    }
    return out;
}

using TT = TTFormat<double>;
using TR = TRFormat<double>;

}  // namespace trnn
