// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace trnn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ContractionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

inline Index volume(std::span<const Index> shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>{});
}

/// Operation tally filled in by instrumented contractions.
///
/// `multiply_adds` counts one per scalar product accumulated into an output;
/// `peak_intermediate_scalars` is the size of the largest contraction result.
struct FlopReport {
    std::int64_t multiply_adds{0};
    std::int64_t peak_intermediate_scalars{0};

    void record(std::int64_t madds, std::int64_t result_size) {
        multiply_adds += madds;
        peak_intermediate_scalars = std::max(peak_intermediate_scalars, result_size);
    }
    void merge(const FlopReport& other) {
        multiply_adds += other.multiply_adds;
        peak_intermediate_scalars =
            std::max(peak_intermediate_scalars, other.peak_intermediate_scalars);
    }
    bool operator==(const FlopReport&) const = default;
};

/// Row-major linear offset of `subscripts` within `shape`.
inline Index flat_index(std::span<const Index> shape, std::span<const Index> subscripts) {
    if (shape.size() != subscripts.size())
        throw std::out_of_range("flat_index: expected " + std::to_string(shape.size()) +
                                " subscripts, got " + std::to_string(subscripts.size()));
    Index offset = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (subscripts[k] < 0 || subscripts[k] >= shape[k])
            throw std::out_of_range("flat_index: subscript " + std::to_string(subscripts[k]) +
                                    " out of range for axis " + std::to_string(k) +
                                    " of size " + std::to_string(shape[k]));
        offset = offset * shape[k] + subscripts[k];
    }
    return offset;
}

inline Shape unravel_index(std::span<const Index> shape, Index offset) {
    Shape sub(shape.size());
    for (std::size_t k = shape.size(); k-- > 0;) {
        sub[k] = offset % shape[k];
        offset /= shape[k];
    }
    return sub;
}

inline Shape row_major_strides(std::span<const Index> shape) {
    Shape strides(shape.size(), 1);
    for (std::size_t k = shape.size(); k-- > 1;) strides[k - 1] = strides[k] * shape[k];
    return strides;
}

/// Dense d-order tensor stored flat in row-major order (last index fastest).
///
/// An order-0 tensor (empty shape) holds a single scalar.
template <typename Scalar>
class DenseTensor {
public:
    using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    DenseTensor() : data_(Storage::Zero(1)) {}

    explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
        check_shape(shape_);
        data_ = Storage::Zero(volume(shape_));
    }

    DenseTensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape(shape_);
        if (data_.size() != volume(shape_))
            throw ShapeError("DenseTensor: data length " + std::to_string(data_.size()) +
                             " does not match shape " + to_string(shape_));
    }

    static DenseTensor Constant(Shape shape, Scalar value) {
        DenseTensor t(std::move(shape));
        t.data_.setConstant(value);
        return t;
    }

    template <typename Rng, typename Dist>
    static DenseTensor Random(Shape shape, Rng& rng, Dist& dist) {
        DenseTensor t(std::move(shape));
        for (Index i = 0; i < t.size(); ++i) t.data_[i] = static_cast<Scalar>(dist(rng));
        return t;
    }

    const Shape& shape() const { return shape_; }
    Index order() const { return static_cast<Index>(shape_.size()); }
    Index size() const { return data_.size(); }
    Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }

    const Storage& data() const { return data_; }
    Storage& data() { return data_; }

    Scalar at(std::span<const Index> subscripts) const {
        return data_[flat_index(shape_, subscripts)];
    }
    Scalar& at(std::span<const Index> subscripts) { return data_[flat_index(shape_, subscripts)]; }

    template <typename... Ix>
        requires(std::is_integral_v<Ix> && ...)
    Scalar operator()(Ix... idx) const {
        const std::array<Index, sizeof...(Ix)> sub{static_cast<Index>(idx)...};
        return at(sub);
    }
    template <typename... Ix>
        requires(std::is_integral_v<Ix> && ...)
    Scalar& operator()(Ix... idx) {
        const std::array<Index, sizeof...(Ix)> sub{static_cast<Index>(idx)...};
        return at(sub);
    }

    DenseTensor reshaped(Shape new_shape) const {
        check_shape(new_shape);
        if (volume(new_shape) != size())
            throw ShapeError("reshape: cannot view " + to_string(shape_) + " as " +
                             to_string(new_shape));
        return DenseTensor(std::move(new_shape), data_);
    }

    DenseTensor& operator*=(Scalar alpha) {
        data_ *= alpha;
        return *this;
    }

private:
    static void check_shape(const Shape& shape) {
        for (Index d : shape)
            if (d < 1) throw ShapeError("DenseTensor: non-positive dimension in " + to_string(shape));
    }

    Shape shape_;
    Storage data_;
};

template <typename Scalar>
DenseTensor<Scalar> reshape(const DenseTensor<Scalar>& t, Shape new_shape) {
    return t.reshaped(std::move(new_shape));
}

/// Axis permutation: result axis k is input axis `perm[k]`.
template <typename Scalar>
DenseTensor<Scalar> permute(const DenseTensor<Scalar>& t, std::span<const Index> perm) {
    const auto d = static_cast<std::size_t>(t.order());
    if (perm.size() != d) throw ShapeError("permute: permutation length mismatch");
    std::vector<bool> seen(d, false);
    for (Index p : perm) {
        if (p < 0 || static_cast<std::size_t>(p) >= d || seen[static_cast<std::size_t>(p)])
            throw ShapeError("permute: invalid permutation");
        seen[static_cast<std::size_t>(p)] = true;
    }
    bool identity = true;
    for (std::size_t k = 0; k < d; ++k) identity = identity && perm[k] == static_cast<Index>(k);
    if (identity) return t;

    const Shape in_strides = row_major_strides(t.shape());
    Shape out_shape(d), strides(d);
    for (std::size_t k = 0; k < d; ++k) {
        out_shape[k] = t.shape()[static_cast<std::size_t>(perm[k])];
        strides[k] = in_strides[static_cast<std::size_t>(perm[k])];
    }
    DenseTensor<Scalar> out(out_shape);
    const auto& src = t.data();
    auto& dst = out.data();

    // Odometer over output subscripts; innermost axis handled as a strided run.
    Shape sub(d, 0);
    const Index inner = out_shape[d - 1];
    const Index inner_stride = strides[d - 1];
    Index src_off = 0;
    for (Index o = 0; o < out.size(); o += inner) {
        for (Index j = 0; j < inner; ++j) dst[o + j] = src[src_off + j * inner_stride];
        for (std::size_t k = d - 1; k-- > 0;) {
            ++sub[k];
            src_off += strides[k];
            if (sub[k] < out_shape[k]) break;
            src_off -= strides[k] * out_shape[k];
            sub[k] = 0;
        }
    }
    return out;
}

template <typename Scalar>
DenseTensor<Scalar> permute(const DenseTensor<Scalar>& t, std::initializer_list<Index> perm) {
    return permute(t, std::span<const Index>(perm.begin(), perm.size()));
}

/// Generalized contraction: sums over the paired axes `axes_a[i]` / `axes_b[i]`.
///
/// The result carries the uncontracted axes of `a` in order, followed by the
/// uncontracted axes of `b` in order. Implemented as permute + GEMM.
template <typename Scalar>
DenseTensor<Scalar> contract(const DenseTensor<Scalar>& a, const DenseTensor<Scalar>& b,
                             std::span<const Index> axes_a, std::span<const Index> axes_b,
                             FlopReport* report = nullptr) {
    auto fail = [&](const std::string& why) {
        throw ContractionError("contract " + to_string(a.shape()) + " x " + to_string(b.shape()) +
                               ": " + why);
    };
    if (axes_a.size() != axes_b.size()) fail("axis list lengths differ");
    const auto da = static_cast<std::size_t>(a.order());
    const auto db = static_cast<std::size_t>(b.order());
    std::vector<bool> used_a(da, false), used_b(db, false);
    Index shared = 1;
    for (std::size_t i = 0; i < axes_a.size(); ++i) {
        const Index ia = axes_a[i], ib = axes_b[i];
        if (ia < 0 || static_cast<std::size_t>(ia) >= da || ib < 0 ||
            static_cast<std::size_t>(ib) >= db)
            fail("axis out of range");
        if (used_a[static_cast<std::size_t>(ia)] || used_b[static_cast<std::size_t>(ib)])
            fail("duplicate axis");
        used_a[static_cast<std::size_t>(ia)] = used_b[static_cast<std::size_t>(ib)] = true;
        if (a.shape()[static_cast<std::size_t>(ia)] != b.shape()[static_cast<std::size_t>(ib)])
            fail("dimension mismatch on axes (" + std::to_string(ia) + "," + std::to_string(ib) +
                 ")");
        shared *= a.shape()[static_cast<std::size_t>(ia)];
    }

    Shape perm_a, perm_b, out_shape;
    for (std::size_t k = 0; k < da; ++k)
        if (!used_a[k]) {
            perm_a.push_back(static_cast<Index>(k));
            out_shape.push_back(a.shape()[k]);
        }
    const Index rows = volume(out_shape);
    perm_a.insert(perm_a.end(), axes_a.begin(), axes_a.end());
    perm_b.assign(axes_b.begin(), axes_b.end());
    Index cols = 1;
    for (std::size_t k = 0; k < db; ++k)
        if (!used_b[k]) {
            perm_b.push_back(static_cast<Index>(k));
            out_shape.push_back(b.shape()[k]);
            cols *= b.shape()[k];
        }

    using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const DenseTensor<Scalar> pa = permute(a, perm_a);
    const DenseTensor<Scalar> pb = permute(b, perm_b);
    DenseTensor<Scalar> out(out_shape);
    Eigen::Map<const RowMat> ma(pa.data().data(), rows, shared);
    Eigen::Map<const RowMat> mb(pb.data().data(), shared, cols);
    Eigen::Map<RowMat> mo(out.data().data(), rows, cols);
    mo.noalias() = ma * mb;

    if (report) report->record(rows * shared * cols, out.size());
    return out;
}

template <typename Scalar>
DenseTensor<Scalar> contract(const DenseTensor<Scalar>& a, const DenseTensor<Scalar>& b,
                             std::initializer_list<Index> axes_a,
                             std::initializer_list<Index> axes_b,
                             FlopReport* report = nullptr) {
    return contract(a, b, std::span<const Index>(axes_a.begin(), axes_a.size()),
                    std::span<const Index>(axes_b.begin(), axes_b.size()), report);
}

/// Sum over the diagonal of two equal-sized axes; remaining axes keep their order.
template <typename Scalar>
DenseTensor<Scalar> trace(const DenseTensor<Scalar>& t, Index axis1, Index axis2) {
    const auto d = t.order();
    if (axis1 == axis2 || axis1 < 0 || axis2 < 0 || axis1 >= d || axis2 >= d)
        throw ShapeError("trace: invalid axes");
    if (t.dim(axis1) != t.dim(axis2))
        throw ShapeError("trace: axes of unequal size in " + to_string(t.shape()));
    Shape perm, rest;
    for (Index k = 0; k < d; ++k)
        if (k != axis1 && k != axis2) {
            perm.push_back(k);
            rest.push_back(t.dim(k));
        }
    perm.push_back(axis1);
    perm.push_back(axis2);
    const auto p = permute(t, perm);
    const Index n = t.dim(axis1);
    const Index inner = n * n;
    DenseTensor<Scalar> out(rest);
    for (Index o = 0; o < out.size(); ++o) {
        Scalar s{0};
        for (Index r = 0; r < n; ++r) s += p.data()[o * inner + r * n + r];
        out.data()[o] = s;
    }
    return out;
}

/// Sub-tensor at `index` along `axis`, keeping that axis with extent 1.
template <typename Scalar>
DenseTensor<Scalar> slice(const DenseTensor<Scalar>& t, Index axis, Index index) {
    if (axis < 0 || axis >= t.order()) throw ShapeError("slice: axis out of range");
    if (index < 0 || index >= t.dim(axis)) throw std::out_of_range("slice: index out of range");
    Shape shape = t.shape();
    const auto ax = static_cast<std::size_t>(axis);
    const Index outer = volume(std::span<const Index>(shape.data(), ax));
    const Index inner = volume(std::span<const Index>(shape.data() + ax + 1, shape.size() - ax - 1));
    const Index n = shape[ax];
    shape[ax] = 1;
    DenseTensor<Scalar> out(shape);
    for (Index o = 0; o < outer; ++o)
        out.data().segment(o * inner, inner) = t.data().segment((o * n + index) * inner, inner);
    return out;
}

/// Tensor whose axes carry integer labels; contraction pairs every shared label.
///
/// Keeps fixed contraction schedules readable: the caller lists operands in the
/// order they are absorbed and the labels decide which axes meet.
template <typename Scalar>
struct LabeledTensor {
    DenseTensor<Scalar> tensor;
    std::vector<int> labels;
};

template <typename Scalar>
LabeledTensor<Scalar> contract_shared(const LabeledTensor<Scalar>& a, const LabeledTensor<Scalar>& b,
                                      FlopReport* report = nullptr) {
    Shape axes_a, axes_b;
    std::vector<int> out_labels;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        const auto it = std::find(b.labels.begin(), b.labels.end(), a.labels[i]);
        if (it != b.labels.end()) {
            axes_a.push_back(static_cast<Index>(i));
            axes_b.push_back(static_cast<Index>(it - b.labels.begin()));
        } else {
            out_labels.push_back(a.labels[i]);
        }
    }
    for (int l : b.labels)
        if (std::find(a.labels.begin(), a.labels.end(), l) == a.labels.end()) out_labels.push_back(l);
    return {contract(a.tensor, b.tensor, axes_a, axes_b, report), std::move(out_labels)};
}

/// Reorders axes so the labels appear as in `order`.
template <typename Scalar>
DenseTensor<Scalar> arrange(const LabeledTensor<Scalar>& t, std::span<const int> order) {
    if (order.size() != t.labels.size()) throw ShapeError("arrange: label count mismatch");
    Shape perm;
    for (int l : order) {
        const auto it = std::find(t.labels.begin(), t.labels.end(), l);
        if (it == t.labels.end()) throw ShapeError("arrange: unknown label " + std::to_string(l));
        perm.push_back(static_cast<Index>(it - t.labels.begin()));
    }
    return permute(t.tensor, perm);
}

using Tensor = DenseTensor<double>;

}  // namespace trnn
