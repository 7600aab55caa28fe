// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "trnn/rnn.hpp"

using namespace trnn;

namespace {

Eigen::MatrixXd gaussian(Index r, Index c, std::mt19937_64& rng, double std = 1.0) {
    std::normal_distribution<double> nd(0.0, std);
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

TRLSTMParams zero_params(Index I, Index H) {
    TRLSTMParams p;
    for (std::size_t g = 0; g < 4; ++g) {
        p.W[g] = InputMap::dense(Eigen::MatrixXd::Zero(H, I));
        p.U[g] = Eigen::MatrixXd::Zero(H, H);
        p.b[g] = Eigen::VectorXd::Zero(H);
    }
    return p;
}

double sig(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// Textbook LSTM step on a single sample with explicit loops.
LSTMState reference_step(const std::array<Eigen::MatrixXd, 4>& W, const TRLSTMParams& p, const LSTMState& s,
                         const Eigen::VectorXd& x) {
    const Index H = p.hidden_size();
    LSTMState out{Eigen::MatrixXd(H, 1), Eigen::MatrixXd(H, 1)};
    for (Index r = 0; r < H; ++r) {
        std::array<double, 4> a{};
        for (std::size_t g = 0; g < 4; ++g) {
            a[g] = p.b[g](r);
            for (Index i = 0; i < x.size(); ++i) a[g] += W[g](r, i) * x(i);
            for (Index j = 0; j < H; ++j) a[g] += p.U[g](r, j) * s.h(j, 0);
        }
        const double k = sig(a[0]), f = sig(a[1]), o = sig(a[2]), g = std::tanh(a[3]);
        out.c(r, 0) = f * s.c(r, 0) + k * g;
        out.h(r, 0) = o * std::tanh(out.c(r, 0));
    }
    return out;
}

}  // namespace

TEST_CASE("zero weights, zero biases, zero state") {
    const auto p = zero_params(3, 2);
    const auto step = tr_lstm_step(p, LSTMState::zeros(2), Eigen::VectorXd::Ones(3));
    for (std::size_t g : {kGateK, kGateF, kGateO}) CHECK(step.gates[g].isConstant(0.5));
    CHECK(step.gates[kGateG].isZero());
    CHECK(step.state.c.isZero());
    CHECK(step.state.h.isZero());
}

TEST_CASE("saturated gates give perfect memory") {
    auto p = zero_params(3, 4);
    std::mt19937_64 rng(1);
    for (std::size_t g = 0; g < 4; ++g) p.W[g] = InputMap::dense(gaussian(4, 3, rng, 0.1));
    p.b[kGateF].setConstant(60);
    p.b[kGateK].setConstant(-60);
    LSTMState s{gaussian(4, 1, rng), gaussian(4, 1, rng)};
    const auto step = tr_lstm_step(p, s, gaussian(3, 1, rng));
    CHECK((step.state.c - s.c).cwiseAbs().maxCoeff() < 1e-20);
}

TEST_CASE("dense cell matches a loop-level reference") {
    std::mt19937_64 rng(2);
    const auto p = TRLSTMParams::random_dense(5, 3, 7);
    std::array<Eigen::MatrixXd, 4> W;
    for (std::size_t g = 0; g < 4; ++g) W[g] = p.W[g].matrix();
    LSTMState s{gaussian(3, 1, rng), gaussian(3, 1, rng)};
    const Eigen::VectorXd x = gaussian(5, 1, rng);
    const auto ours = tr_lstm_step(p, s, x).state;
    const auto ref = reference_step(W, p, s, x);
    CHECK((ours.h - ref.h).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((ours.c - ref.c).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("exactly embedded ring maps reproduce the dense LSTM (4 -> 2)") {
    std::mt19937_64 rng(3);
    const auto dense = TRLSTMParams::random_dense(4, 2, 11);
    auto ring = dense;
    for (std::size_t g = 0; g < 4; ++g) {
        // W is H×I; the layer stores the I×O unfolding, row-major over (i1, i2, o).
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> wt =
            dense.W[g].matrix().transpose();
        const Tensor t({2, 2, 2}, Eigen::Map<const Eigen::VectorXd>(wt.data(), wt.size()));
        ring.W[g] = InputMap::ring(TRL({2, 2}, {2}, tr_embed_dense(t)));
    }
    LSTMState s{gaussian(2, 3, rng), gaussian(2, 3, rng)};
    for (int t = 0; t < 4; ++t) {
        const auto x = gaussian(4, 3, rng);
        const auto a = tr_lstm_step(dense, s, x), b = tr_lstm_step(ring, s, x);
        CHECK((a.state.h - b.state.h).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((a.state.c - b.state.c).cwiseAbs().maxCoeff() <= 1e-8);
        s = a.state;
    }
}

TEST_CASE("ring cells agree with their dense reconstructions") {
    std::mt19937_64 rng(4);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ring = TRLSTMParams::random_ring({2, 3, 2}, {2, 2}, {2, 3, 2, 2, 3}, seed);
        auto dense = ring;
        for (auto& w : dense.W) w = w.densified();
        CHECK_FALSE(dense.W[0].is_ring());
        std::vector<Eigen::MatrixXd> xs;
        for (int t = 0; t < 3; ++t) xs.push_back(gaussian(12, 2, rng));
        const auto a = run_sequence(ring, xs), b = run_sequence(dense, xs);
        for (std::size_t t = 0; t < xs.size(); ++t) {
            CHECK((a.steps[t].state.h - b.steps[t].state.h).cwiseAbs().maxCoeff() <= 1e-8);
            CHECK((a.steps[t].state.c - b.steps[t].state.c).cwiseAbs().maxCoeff() <= 1e-8);
        }
    }
}

TEST_CASE("gate ranges") {
    std::mt19937_64 rng(5);
    const auto p = TRLSTMParams::random_ring({2, 2, 2}, {2, 2}, {2, 2, 2, 2, 2}, 9);
    std::vector<Eigen::MatrixXd> xs;
    for (int t = 0; t < 10; ++t) xs.push_back(gaussian(8, 4, rng, 3.0));
    for (const auto& step : run_sequence(p, xs).steps) {
        for (std::size_t g : {kGateK, kGateF, kGateO}) {
            CHECK(step.gates[g].minCoeff() > 0);
            CHECK(step.gates[g].maxCoeff() < 1);
        }
        CHECK(step.gates[kGateG].minCoeff() > -1);
        CHECK(step.gates[kGateG].maxCoeff() < 1);
    }
}

TEST_CASE("constant input with an open forget gate") {
    std::mt19937_64 rng(6);
    auto p = TRLSTMParams::random_dense(3, 4, 12, 30.0);
    const std::vector<Eigen::MatrixXd> xs(12, gaussian(3, 1, rng));

    // Bound: |c_t| <= t · max|g| for any recurrence.
    auto run = run_sequence(p, xs);
    double max_g = 0;
    for (const auto& s : run.steps) max_g = std::max(max_g, s.gates[kGateG].cwiseAbs().maxCoeff());
    for (std::size_t t = 0; t < run.steps.size(); ++t)
        CHECK(run.steps[t].state.c.cwiseAbs().maxCoeff() <= static_cast<double>(t + 1) * max_g + 1e-12);

    // With the recurrence severed, k ⊙ g is fixed and |c_t| grows monotonically.
    for (auto& u : p.U) u.setZero();
    run = run_sequence(p, xs);
    for (std::size_t t = 1; t < run.steps.size(); ++t)
        CHECK((run.steps[t].state.c.array().abs() >= run.steps[t - 1].state.c.array().abs()).all());
}

TEST_CASE("run_sequence") {
    std::mt19937_64 rng(7);
    const auto p = TRLSTMParams::random_dense(3, 2, 1);
    CHECK_THROWS_AS(run_sequence(p, {}), std::invalid_argument);
    const auto x = gaussian(3, 2, rng);
    const auto one = run_sequence(p, {x});
    const auto step = tr_lstm_step(p, LSTMState::zeros(2, 2), x);
    CHECK(one.steps.size() == 1);
    CHECK(one.final_h == step.state.h);
    CHECK_THROWS_AS(run_sequence(p, {x, gaussian(3, 1, rng)}), ShapeError);
}

TEST_CASE("six steps over 57600-dimensional inputs into H = 256") {
    const Shape in{4, 2, 5, 8, 6, 5, 3, 2}, hidden{4, 4, 2, 4, 2};
    std::vector<Index> ranks(13, 5);
    ranks[0] = 10;
    const auto p = TRLSTMParams::random_ring(in, hidden, ranks, 3);
    CHECK(p.input_size() == 57600);
    CHECK(p.hidden_size() == 256);
    std::vector<Eigen::MatrixXd> xs(6, Eigen::MatrixXd::Constant(57600, 1, 0.01));
    const auto r = run_sequence(p, xs);
    REQUIRE(r.steps.size() == 6);
    for (const auto& s : r.steps) {
        CHECK(s.state.h.rows() == 256);
        CHECK(s.state.c.rows() == 256);
        CHECK(s.state.h.allFinite());
    }
}

TEST_CASE("shape and value errors") {
    const auto p = TRLSTMParams::random_dense(3, 2, 1);
    CHECK_THROWS_AS(tr_lstm_step(p, LSTMState::zeros(2), Eigen::VectorXd::Zero(4)), ShapeError);
    CHECK_THROWS_AS(tr_lstm_step(p, LSTMState::zeros(3), Eigen::VectorXd::Zero(3)), ShapeError);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    bad(1) = std::nan("");
    CHECK_THROWS_AS(tr_lstm_step(p, LSTMState::zeros(2), bad), std::invalid_argument);
    auto broken = p;
    broken.U[2] = Eigen::MatrixXd::Zero(2, 3);
    CHECK_THROWS_AS(broken.validate(), ShapeError);
}

TEST_CASE("TR-RNN step") {
    std::mt19937_64 rng(8);
    const auto w = InputMap::ring(TRL::random({2, 3}, {2, 2}, {2, 2, 3, 2}, 4));
    const Eigen::MatrixXd zeroU = Eigen::MatrixXd::Zero(4, 4);
    const Eigen::VectorXd zerob = Eigen::VectorXd::Zero(4);

    const auto zero_map = InputMap::dense(Eigen::MatrixXd::Zero(4, 6));
    CHECK(tr_rnn_step(zero_map, zeroU, zerob, Eigen::MatrixXd::Zero(4, 1), Eigen::MatrixXd::Zero(6, 1))
              .isConstant(0.5));

    const auto x = gaussian(6, 2, rng), h = gaussian(4, 2, rng);
    const Eigen::VectorXd b = gaussian(4, 1, rng);
    Eigen::MatrixXd ff = w.apply(x);
    ff.colwise() += b;
    ff = (1.0 + (-ff.array()).exp()).inverse().matrix();
    CHECK((tr_rnn_step(w, zeroU, b, h, x) - ff).cwiseAbs().maxCoeff() < 1e-15);

    const auto U = gaussian(4, 4, rng);
    const Eigen::MatrixXd W = dense_weight(w.layer()).transpose();
    Eigen::MatrixXd a = W * x + U * h;
    a.colwise() += b;
    const Eigen::MatrixXd ref = (1.0 + (-a.array()).exp()).inverse().matrix();
    CHECK((tr_rnn_step(w, U, b, h, x) - ref).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK_THROWS_AS(tr_rnn_step(w, zeroU, zerob, h, gaussian(5, 2, rng)), ShapeError);
}

namespace {

GradCheckReport bptt_check(TRLSTMParams p, std::uint64_t seed, bool corrupt) {
    std::mt19937_64 rng(seed);
    const std::vector<Eigen::MatrixXd> xs{gaussian(8, 1, rng), gaussian(8, 1, rng)};
    const LSTMState s0{gaussian(4, 1, rng, 0.5), gaussian(4, 1, rng, 0.5)};
    const Eigen::MatrixXd w = gaussian(4, 1, rng);
    auto loss = [&] { return run_sequence(p, xs, s0).final_h.cwiseProduct(w).sum(); };
    const auto fwd = run_sequence(p, xs, s0);
    auto analytic = lstm_backward(p, xs, s0, fwd, w).flat();
    if (corrupt) analytic[1][0] += 0.1;
    const auto views = p.views();
    return grad_check(loss, views, analytic, 1e-5, 1e-4);
}

}  // namespace

TEST_CASE("BPTT matches central differences (2 steps, H = 4, I = 8)") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto ring = TRLSTMParams::random_ring({2, 2, 2}, {2, 2}, {2, 3, 2, 2, 3}, seed, 0.5);
        for (auto& b : ring.b) b.setRandom();
        const auto r = bptt_check(ring, 100 + seed, false);
        CHECK(r.passed);
        CHECK(r.max_rel_error <= 1e-4);
        CHECK(r.checked == ring.input_param_count() + 4 * 16 + 4 * 4);

        const auto d = bptt_check(TRLSTMParams::random_dense(8, 4, seed), 200 + seed, false);
        CHECK(d.passed);
    }
}

TEST_CASE("BPTT check catches a corrupted gradient") {
    const auto ring = TRLSTMParams::random_ring({2, 2, 2}, {2, 2}, {2, 2, 2, 2, 2}, 1);
    const auto r = bptt_check(ring, 5, true);
    CHECK_FALSE(r.passed);
    CHECK(r.worst_parameter == "W_k.core1[0]");
}
