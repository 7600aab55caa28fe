// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "trnn/formats.hpp"
#include "trnn/tensor.hpp"

namespace trnn {

/// Factorized linear map y = TRL(W, x), W ∈ R^{I×O} stored as a ring of n
/// input cores [R, I_i, R] followed by m output cores [R, O_j, R].
template <typename Scalar>
class TRLayer {
public:
    TRLayer() = default;

    TRLayer(Shape input_dims, Shape output_dims, TRFormat<Scalar> cores)
        : input_dims_(std::move(input_dims)), output_dims_(std::move(output_dims)),
          cores_(std::move(cores)) {
        if (input_dims_.empty() || output_dims_.empty())
            throw FormatError("TRLayer: need at least one input and one output core");
        if (static_cast<std::size_t>(cores_.order()) != input_dims_.size() + output_dims_.size())
            throw FormatError("TRLayer: expected " +
                              std::to_string(input_dims_.size() + output_dims_.size()) +
                              " cores, got " + std::to_string(cores_.order()));
        const Shape dims = cores_.dims();
        for (std::size_t k = 0; k < dims.size(); ++k) {
            const Index want = k < n() ? input_dims_[k] : output_dims_[k - n()];
            if (dims[k] != want)
                throw FormatError("TRLayer: core " + std::to_string(k) + " has mode size " +
                                  std::to_string(dims[k]) + ", expected " + std::to_string(want));
        }
    }

    /// Random layer. `ranks` lists R_0..R_{n+m-1}; the default variance makes
    /// Var(y_o) ≈ Var(x_i), i.e. Var(W_io) = 1/I.
    static TRLayer random(Shape input_dims, Shape output_dims, const std::vector<Index>& ranks,
                          std::uint64_t seed, std::optional<double> weight_variance = {}) {
        Shape dims = input_dims;
        dims.insert(dims.end(), output_dims.begin(), output_dims.end());
        const double v = weight_variance.value_or(1.0 / static_cast<double>(volume(input_dims)));
        return TRLayer(std::move(input_dims), std::move(output_dims),
                       random_tr<Scalar>(dims, ranks, seed, v));
    }

    std::size_t n() const { return input_dims_.size(); }
    std::size_t m() const { return output_dims_.size(); }
    const Shape& input_dims() const { return input_dims_; }
    const Shape& output_dims() const { return output_dims_; }
    Index input_size() const { return volume(input_dims_); }
    Index output_size() const { return volume(output_dims_); }
    const TRFormat<Scalar>& cores() const { return cores_; }
    TRFormat<Scalar>& cores() { return cores_; }
    std::vector<Index> ranks() const { return cores_.ranks(); }
    Index param_count() const { return cores_.param_count(); }

private:
    Shape input_dims_;
    Shape output_dims_;
    TRFormat<Scalar> cores_;
};

/// Operation tallies of one backward pass: one report per core gradient plus
/// the input gradient.
struct TRLBackwardReport {
    std::vector<FlopReport> per_core;
    FlopReport input;

    FlopReport total() const {
        FlopReport t = input;
        for (const auto& r : per_core) t.merge(r);
        return t;
    }
};

template <typename Scalar>
struct TRLGradients {
    std::vector<DenseTensor<Scalar>> cores;
    /// Same shape as the x passed in; empty when not requested.
    std::optional<DenseTensor<Scalar>> input;
};

namespace detail {

// Axis labels for the layer network. Rank edge k joins core k-1 and core k,
// so core k carries labels (k, mode, k+1 mod d).
inline constexpr int kBatchLabel = -1;
inline int input_label(std::size_t i) { return 1000 + static_cast<int>(i); }
inline int output_label(std::size_t j) { return 2000 + static_cast<int>(j); }

template <typename Scalar>
std::vector<LabeledTensor<Scalar>> labeled_cores(const TRLayer<Scalar>& layer) {
    const std::size_t d = layer.n() + layer.m();
    std::vector<LabeledTensor<Scalar>> out;
    out.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        const int mode = k < layer.n() ? input_label(k) : output_label(k - layer.n());
        out.push_back({layer.cores().core(static_cast<Index>(k)),
                       {static_cast<int>(k), mode, static_cast<int>((k + 1) % d)}});
    }
    return out;
}

/// Returns true if `t` carries a leading batch axis for a map of `length` features.
template <typename Scalar>
bool batched(const DenseTensor<Scalar>& t, Index length, const char* what) {
    if (t.order() == 1 && t.dim(0) == length) return false;
    if (t.order() == 2 && t.dim(1) == length) return true;
    throw ShapeError(std::string("TRL: ") + what + " must have shape [" + std::to_string(length) +
                     "] or [batch," + std::to_string(length) + "], got " + to_string(t.shape()));
}

template <typename Scalar>
LabeledTensor<Scalar> tensorize(const DenseTensor<Scalar>& t, bool batch, const Shape& dims,
                                int (*label)(std::size_t)) {
    Shape shape;
    std::vector<int> labels;
    if (batch) {
        shape.push_back(t.dim(0));
        labels.push_back(kBatchLabel);
    }
    for (std::size_t i = 0; i < dims.size(); ++i) {
        shape.push_back(dims[i]);
        labels.push_back(label(i));
    }
    return {t.reshaped(shape), labels};
}

template <typename Scalar>
DenseTensor<Scalar> fold(std::vector<const LabeledTensor<Scalar>*> seq, const std::vector<int>& order,
                         FlopReport* report) {
    LabeledTensor<Scalar> acc = *seq.front();
    for (std::size_t s = 1; s < seq.size(); ++s) acc = contract_shared(acc, *seq[s], report);
    return arrange(acc, order);
}

}  // namespace detail

/// Forward pass. `x` is [I] or [B, I]; the result is [O] or [B, O].
///
/// Schedule: X absorbs G1..Gn (one input mode and one rank edge per step,
/// leaving an R_0 x R_n matrix per sample), then G(n+1)..G(n+m) emit the output
/// modes; the closing rank pair is traced in the final contraction.
template <typename Scalar>
DenseTensor<Scalar> trl_forward(const TRLayer<Scalar>& layer, const DenseTensor<Scalar>& x,
                                FlopReport* report = nullptr) {
    const bool batch = detail::batched(x, layer.input_size(), "input");
    const auto cores = detail::labeled_cores(layer);
    const auto xt = detail::tensorize(x, batch, layer.input_dims(), &detail::input_label);

    std::vector<const LabeledTensor<Scalar>*> seq{&xt};
    for (const auto& c : cores) seq.push_back(&c);
    std::vector<int> order;
    if (batch) order.push_back(detail::kBatchLabel);
    for (std::size_t j = 0; j < layer.m(); ++j) order.push_back(detail::output_label(j));

    auto y = detail::fold(std::move(seq), order, report);
    return batch ? y.reshaped({x.dim(0), layer.output_size()}) : y.reshaped({layer.output_size()});
}

template <typename Scalar>
std::pair<DenseTensor<Scalar>, FlopReport> trl_forward_instrumented(const TRLayer<Scalar>& layer,
                                                                    const DenseTensor<Scalar>& x) {
    FlopReport report;
    auto y = trl_forward(layer, x, &report);
    return {std::move(y), report};
}

/// Gradients of L = <grad_y, trl_forward(x)>, summed over the batch axis.
///
/// ∂L/∂G(k) contracts, in order: X, G1..G(k-1), G(k+1)..G(n+m), ∂L/∂Y. Skipping
/// core k leaves its two rank edges open, so for a middle input core the
/// intermediate carries four rank indices (O(R^4) memory, O(R^5) time per step).
/// ∂L/∂x runs ∂L/∂Y through the output cores and then the input cores.
template <typename Scalar>
TRLGradients<Scalar> trl_backward(const TRLayer<Scalar>& layer, const DenseTensor<Scalar>& x,
                                  const DenseTensor<Scalar>& grad_y, bool want_input_grad = true,
                                  TRLBackwardReport* report = nullptr) {
    const bool batch = detail::batched(x, layer.input_size(), "input");
    if (detail::batched(grad_y, layer.output_size(), "output gradient") != batch ||
        (batch && grad_y.dim(0) != x.dim(0)))
        throw ShapeError("TRL backward: batch mismatch between x " + to_string(x.shape()) +
                         " and grad_y " + to_string(grad_y.shape()));
    const std::size_t d = layer.n() + layer.m();
    const auto cores = detail::labeled_cores(layer);
    const auto xt = detail::tensorize(x, batch, layer.input_dims(), &detail::input_label);
    const auto gy = detail::tensorize(grad_y, batch, layer.output_dims(), &detail::output_label);

    if (report) *report = TRLBackwardReport{std::vector<FlopReport>(d), {}};
    TRLGradients<Scalar> grads;
    grads.cores.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<const LabeledTensor<Scalar>*> seq{&xt};
        for (std::size_t j = 0; j < d; ++j)
            if (j != k) seq.push_back(&cores[j]);
        seq.push_back(&gy);
        grads.cores.push_back(
            detail::fold(std::move(seq), cores[k].labels, report ? &report->per_core[k] : nullptr));
    }

    if (want_input_grad) {
        std::vector<const LabeledTensor<Scalar>*> seq{&gy};
        for (std::size_t j = layer.n(); j < d; ++j) seq.push_back(&cores[j]);
        for (std::size_t j = 0; j < layer.n(); ++j) seq.push_back(&cores[j]);
        std::vector<int> order;
        if (batch) order.push_back(detail::kBatchLabel);
        for (std::size_t i = 0; i < layer.n(); ++i) order.push_back(detail::input_label(i));
        auto gx = detail::fold(std::move(seq), order, report ? &report->input : nullptr);
        grads.input = gx.reshaped(x.shape());
    }
    return grads;
}

/// The I×O unfolding of the reconstructed weight tensor: row = input
/// multi-index, column = output multi-index, both row-major.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense_weight(const TRLayer<Scalar>& layer) {
    using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto w = tr_reconstruct(layer.cores());
    return Eigen::Map<const RowMat>(w.data().data(), layer.input_size(), layer.output_size());
}

using TRL = TRLayer<double>;

}  // namespace trnn
