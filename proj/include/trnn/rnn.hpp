// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "trnn/training.hpp"
#include "trnn/trl.hpp"

namespace trnn {

/// Input-to-hidden map, either a tensor ring layer or a dense H×I matrix.
/// Batches are I×B matrices with one sample per column.
class InputMap {
public:
    InputMap() = default;
    static InputMap dense(Eigen::MatrixXd w);
    static InputMap ring(TRL layer);

    bool is_ring() const { return std::holds_alternative<TRL>(map_); }
    const TRL& layer() const { return std::get<TRL>(map_); }
    const Eigen::MatrixXd& matrix() const { return std::get<Eigen::MatrixXd>(map_); }
    Index input_size() const;
    Index output_size() const;
    Index param_count() const;

    /// I×B -> H×B.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

    /// Adds ∂L/∂params to `acc` (one vector per block) given upstream G (H×B);
    /// writes ∂L/∂x into `dx` when non-null.
    void backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g, std::vector<Eigen::VectorXd>& acc,
                  Eigen::MatrixXd* dx = nullptr) const;

    /// Mutable views of the parameter blocks: cores for a ring, one block for a matrix.
    std::vector<ParamView> views(const std::string& prefix);
    std::vector<Eigen::VectorXd> zero_grads() const;
    /// The same map with the ring replaced by its H×I dense reconstruction.
    InputMap densified() const;

private:
    std::variant<Eigen::MatrixXd, TRL> map_;
};

/// Gate order used throughout: input k, forget f, output o, candidate g.
enum Gate : std::size_t { kGateK = 0, kGateF = 1, kGateO = 2, kGateG = 3 };
inline constexpr std::array<const char*, 4> kGateNames{"k", "f", "o", "g"};

struct TRLSTMParams {
    std::array<InputMap, 4> W;
    std::array<Eigen::MatrixXd, 4> U;
    std::array<Eigen::VectorXd, 4> b;

    Index input_size() const { return W[0].input_size(); }
    Index hidden_size() const { return U[0].rows(); }
    void validate() const;
    Index input_param_count() const;

    /// Four independent ring layers I -> H. U ~ N(0, 1/H), b = 0 except b_f.
    static TRLSTMParams random_ring(const Shape& input_dims, const Shape& hidden_dims,
                                    const std::vector<Index>& ranks, std::uint64_t seed,
                                    double forget_bias = 1.0);
    static TRLSTMParams random_dense(Index input_size, Index hidden_size, std::uint64_t seed,
                                     double forget_bias = 1.0);

    /// Views in the order W_k.., W_f.., W_o.., W_g.., U_k..U_g, b_k..b_g.
    std::vector<ParamView> views();
};

struct LSTMState {
    Eigen::MatrixXd h;  // H×B
    Eigen::MatrixXd c;  // H×B
    static LSTMState zeros(Index hidden, Index batch = 1);
};

struct LSTMStep {
    LSTMState state;
    std::array<Eigen::MatrixXd, 4> gates;  // k, f, o, g after their nonlinearities
};

/// One step: k,f,o = σ(W x + U h + b), g = tanh(..), c = f⊙c + k⊙g, h = o⊙tanh(c).
LSTMStep tr_lstm_step(const TRLSTMParams& p, const LSTMState& s, const Eigen::MatrixXd& x);

/// h_t = σ(W x + U h_{t-1} + b).
Eigen::MatrixXd tr_rnn_step(const InputMap& w, const Eigen::MatrixXd& u, const Eigen::VectorXd& b,
                            const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& x);

struct SequenceResult {
    std::vector<LSTMStep> steps;
    Eigen::MatrixXd final_h;
};

/// Unrolls tr_lstm_step over `xs`; s0 defaults to zeros.
SequenceResult run_sequence(const TRLSTMParams& p, const std::vector<Eigen::MatrixXd>& xs,
                            std::optional<LSTMState> s0 = {});

struct LSTMGradients {
    std::array<std::vector<Eigen::VectorXd>, 4> W;
    std::array<Eigen::MatrixXd, 4> U;
    std::array<Eigen::VectorXd, 4> b;

    /// Flattened in the order of TRLSTMParams::views().
    std::vector<Eigen::VectorXd> flat() const;
};

/// Backpropagation through time for a loss depending on the final h only.
LSTMGradients lstm_backward(const TRLSTMParams& p, const std::vector<Eigen::MatrixXd>& xs,
                            const LSTMState& s0, const SequenceResult& fwd,
                            const Eigen::MatrixXd& grad_final_h);

}  // namespace trnn
