// SPDX-License-Identifier: Apache-2.0
#include "trnn/rnn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace trnn {
namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& a) {
    return (1.0 + (-a.array()).exp()).inverse().matrix();
}

Eigen::MatrixXd gaussian(Index r, Index c, double std, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, std);
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

Tensor as_batch(const Eigen::MatrixXd& m) {
    // Column-major I×B has the memory layout of a row-major [B, I] tensor.
    return Tensor({m.cols(), m.rows()}, Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()));
}

void check_input(const Eigen::MatrixXd& x, Index rows, const char* what) {
    if (x.rows() != rows)
        throw ShapeError(std::string(what) + ": input has " + std::to_string(x.rows()) +
                         " rows, expected " + std::to_string(rows));
    if (!x.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

}  // namespace

InputMap InputMap::dense(Eigen::MatrixXd w) {
    InputMap m;
    m.map_ = std::move(w);
    return m;
}

InputMap InputMap::ring(TRL layer) {
    InputMap m;
    m.map_ = std::move(layer);
    return m;
}

Index InputMap::input_size() const { return is_ring() ? layer().input_size() : matrix().cols(); }
Index InputMap::output_size() const { return is_ring() ? layer().output_size() : matrix().rows(); }
Index InputMap::param_count() const { return is_ring() ? layer().param_count() : matrix().size(); }

Eigen::MatrixXd InputMap::apply(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_size())
        throw ShapeError("InputMap: got " + std::to_string(x.rows()) + " inputs, expected " +
                         std::to_string(input_size()));
    if (!is_ring()) return matrix() * x;
    const auto y = trl_forward(layer(), as_batch(x));
    return Eigen::Map<const Eigen::MatrixXd>(y.data().data(), output_size(), x.cols());
}

void InputMap::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g, std::vector<Eigen::VectorXd>& acc,
                        Eigen::MatrixXd* dx) const {
    if (!is_ring()) {
        Eigen::Map<Eigen::MatrixXd>(acc[0].data(), output_size(), input_size()) += g * x.transpose();
        if (dx) *dx = matrix().transpose() * g;
        return;
    }
    const auto grads = trl_backward(layer(), as_batch(x), as_batch(g), dx != nullptr);
    for (std::size_t k = 0; k < grads.cores.size(); ++k) acc[k] += grads.cores[k].data();
    if (dx) *dx = Eigen::Map<const Eigen::MatrixXd>(grads.input->data().data(), input_size(), x.cols());
}

std::vector<ParamView> InputMap::views(const std::string& prefix) {
    std::vector<ParamView> v;
    if (auto* w = std::get_if<Eigen::MatrixXd>(&map_)) {
        v.push_back({prefix, {w->data(), static_cast<std::size_t>(w->size())}});
        return v;
    }
    auto& ring = std::get<TRL>(map_).cores();
    for (Index k = 0; k < ring.order(); ++k) {
        auto& c = ring.core_data(k);
        v.push_back({prefix + ".core" + std::to_string(k), {c.data(), static_cast<std::size_t>(c.size())}});
    }
    return v;
}

std::vector<Eigen::VectorXd> InputMap::zero_grads() const {
    if (!is_ring()) return {Eigen::VectorXd::Zero(matrix().size())};
    std::vector<Eigen::VectorXd> g;
    for (const auto& c : layer().cores().cores()) g.push_back(Eigen::VectorXd::Zero(c.size()));
    return g;
}

InputMap InputMap::densified() const {
    if (!is_ring()) return *this;
    return dense(dense_weight(layer()).transpose());
}

void TRLSTMParams::validate() const {
    const Index I = input_size(), H = hidden_size();
    for (std::size_t g = 0; g < 4; ++g) {
        if (W[g].input_size() != I || W[g].output_size() != H)
            throw ShapeError(std::string("TRLSTMParams: W_") + kGateNames[g] + " maps " +
                             std::to_string(W[g].input_size()) + " -> " + std::to_string(W[g].output_size()) +
                             ", expected " + std::to_string(I) + " -> " + std::to_string(H));
        if (U[g].rows() != H || U[g].cols() != H)
            throw ShapeError(std::string("TRLSTMParams: U_") + kGateNames[g] + " must be H x H");
        if (b[g].size() != H) throw ShapeError(std::string("TRLSTMParams: b_") + kGateNames[g] + " must have length H");
    }
}

Index TRLSTMParams::input_param_count() const {
    Index n = 0;
    for (const auto& w : W) n += w.param_count();
    return n;
}

TRLSTMParams TRLSTMParams::random_ring(const Shape& input_dims, const Shape& hidden_dims,
                                       const std::vector<Index>& ranks, std::uint64_t seed,
                                       double forget_bias) {
    std::mt19937_64 rng(seed);
    const Index H = volume(hidden_dims);
    TRLSTMParams p;
    for (std::size_t g = 0; g < 4; ++g) {
        p.W[g] = InputMap::ring(TRL::random(input_dims, hidden_dims, ranks, rng()));
        p.U[g] = gaussian(H, H, 1.0 / std::sqrt(static_cast<double>(H)), rng);
        p.b[g] = Eigen::VectorXd::Zero(H);
    }
    p.b[kGateF].setConstant(forget_bias);
    return p;
}

TRLSTMParams TRLSTMParams::random_dense(Index input_size, Index hidden_size, std::uint64_t seed,
                                        double forget_bias) {
    std::mt19937_64 rng(seed);
    TRLSTMParams p;
    for (std::size_t g = 0; g < 4; ++g) {
        p.W[g] = InputMap::dense(gaussian(hidden_size, input_size, 1.0 / std::sqrt(static_cast<double>(input_size)), rng));
        p.U[g] = gaussian(hidden_size, hidden_size, 1.0 / std::sqrt(static_cast<double>(hidden_size)), rng);
        p.b[g] = Eigen::VectorXd::Zero(hidden_size);
    }
    p.b[kGateF].setConstant(forget_bias);
    return p;
}

std::vector<ParamView> TRLSTMParams::views() {
    std::vector<ParamView> v;
    for (std::size_t g = 0; g < 4; ++g) {
        auto w = W[g].views(std::string("W_") + kGateNames[g]);
        v.insert(v.end(), w.begin(), w.end());
    }
    for (std::size_t g = 0; g < 4; ++g)
        v.push_back({std::string("U_") + kGateNames[g], {U[g].data(), static_cast<std::size_t>(U[g].size())}});
    for (std::size_t g = 0; g < 4; ++g)
        v.push_back({std::string("b_") + kGateNames[g], {b[g].data(), static_cast<std::size_t>(b[g].size())}});
    return v;
}

LSTMState LSTMState::zeros(Index hidden, Index batch) {
    return {Eigen::MatrixXd::Zero(hidden, batch), Eigen::MatrixXd::Zero(hidden, batch)};
}

LSTMStep tr_lstm_step(const TRLSTMParams& p, const LSTMState& s, const Eigen::MatrixXd& x) {
    const Index H = p.hidden_size();
    check_input(x, p.input_size(), "tr_lstm_step");
    if (s.h.rows() != H || s.c.rows() != H || s.h.cols() != x.cols() || s.c.cols() != x.cols())
        throw ShapeError("tr_lstm_step: state must be " + std::to_string(H) + " x " + std::to_string(x.cols()));

    LSTMStep out;
    for (std::size_t g = 0; g < 4; ++g) {
        Eigen::MatrixXd a = p.W[g].apply(x) + p.U[g] * s.h;
        a.colwise() += p.b[g];
        out.gates[g] = g == kGateG ? Eigen::MatrixXd(a.array().tanh()) : sigmoid(a);
    }
    out.state.c = out.gates[kGateF].cwiseProduct(s.c) + out.gates[kGateK].cwiseProduct(out.gates[kGateG]);
    out.state.h = out.gates[kGateO].cwiseProduct(Eigen::MatrixXd(out.state.c.array().tanh()));
    return out;
}

Eigen::MatrixXd tr_rnn_step(const InputMap& w, const Eigen::MatrixXd& u, const Eigen::VectorXd& b,
                            const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& x) {
    const Index H = w.output_size();
    check_input(x, w.input_size(), "tr_rnn_step");
    if (u.rows() != H || u.cols() != H || b.size() != H || h_prev.rows() != H || h_prev.cols() != x.cols())
        throw ShapeError("tr_rnn_step: U, b and h_prev must match hidden size " + std::to_string(H));
    Eigen::MatrixXd a = w.apply(x) + u * h_prev;
    a.colwise() += b;
    return sigmoid(a);
}

SequenceResult run_sequence(const TRLSTMParams& p, const std::vector<Eigen::MatrixXd>& xs,
                            std::optional<LSTMState> s0) {
    if (xs.empty()) throw std::invalid_argument("run_sequence: empty sequence");
    for (const auto& x : xs)
        if (x.rows() != xs.front().rows() || x.cols() != xs.front().cols())
            throw ShapeError("run_sequence: inputs must share one shape");
    SequenceResult r;
    r.steps.reserve(xs.size());
    LSTMState s = s0 ? std::move(*s0) : LSTMState::zeros(p.hidden_size(), xs.front().cols());
    for (const auto& x : xs) {
        r.steps.push_back(tr_lstm_step(p, r.steps.empty() ? s : r.steps.back().state, x));
    }
    r.final_h = r.steps.back().state.h;
    return r;
}

std::vector<Eigen::VectorXd> LSTMGradients::flat() const {
    std::vector<Eigen::VectorXd> v;
    for (const auto& w : W) v.insert(v.end(), w.begin(), w.end());
    for (const auto& u : U) v.push_back(Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()));
    for (const auto& bg : b) v.push_back(bg);
    return v;
}

LSTMGradients lstm_backward(const TRLSTMParams& p, const std::vector<Eigen::MatrixXd>& xs,
                            const LSTMState& s0, const SequenceResult& fwd,
                            const Eigen::MatrixXd& grad_final_h) {
    if (xs.size() != fwd.steps.size()) throw std::invalid_argument("lstm_backward: sequence length mismatch");
    const Index H = p.hidden_size();
    LSTMGradients grads;
    for (std::size_t g = 0; g < 4; ++g) {
        grads.W[g] = p.W[g].zero_grads();
        grads.U[g] = Eigen::MatrixXd::Zero(H, H);
        grads.b[g] = Eigen::VectorXd::Zero(H);
    }

    Eigen::MatrixXd dh = grad_final_h;
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(H, grad_final_h.cols());
    for (std::size_t t = xs.size(); t-- > 0;) {
        const auto& step = fwd.steps[t];
        const LSTMState& prev = t == 0 ? s0 : fwd.steps[t - 1].state;
        const auto& [k, f, o, g] = step.gates;

        const Eigen::ArrayXXd tc = step.state.c.array().tanh();
        dc.array() += dh.array() * o.array() * (1 - tc.square());

        std::array<Eigen::MatrixXd, 4> da;
        da[kGateO] = (dh.array() * tc * o.array() * (1 - o.array())).matrix();
        da[kGateF] = (dc.array() * prev.c.array() * f.array() * (1 - f.array())).matrix();
        da[kGateK] = (dc.array() * g.array() * k.array() * (1 - k.array())).matrix();
        da[kGateG] = (dc.array() * k.array() * (1 - g.array().square())).matrix();

        Eigen::MatrixXd dh_prev = Eigen::MatrixXd::Zero(H, dh.cols());
        for (std::size_t gi = 0; gi < 4; ++gi) {
            grads.U[gi] += da[gi] * prev.h.transpose();
            grads.b[gi] += da[gi].rowwise().sum();
            dh_prev += p.U[gi].transpose() * da[gi];
            p.W[gi].backward(xs[t], da[gi], grads.W[gi]);
        }
        dc = dc.cwiseProduct(f);
        dh = std::move(dh_prev);
    }
    return grads;
}

}  // namespace trnn
