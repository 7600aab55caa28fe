// SPDX-License-Identifier: Apache-2.0
#include "trnn/gradcheck.hpp"

#include <algorithm>
#include <string>

#include "trnn/rnn.hpp"

namespace trnn {

namespace {

Eigen::MatrixXd gaussian(Index r, Index c, std::mt19937_64& rng, double std = 1.0) {
    std::normal_distribution<double> nd(0.0, std);
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

std::span<double> span_of(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TRL random_small_layer(std::mt19937_64& rng, std::size_t max_n, std::size_t max_m, Index max_dim, Index max_rank) {
    std::uniform_int_distribution<std::size_t> nd(1, max_n), md(1, max_m);
    std::uniform_int_distribution<Index> dim(1, max_dim), rank(1, max_rank);
    Shape in(nd(rng)), out(md(rng));
    for (auto& v : in) v = dim(rng);
    for (auto& v : out) v = dim(rng);
    std::vector<Index> ranks(in.size() + out.size());
    for (auto& r : ranks) r = rank(rng);
    return TRL::random(in, out, ranks, rng(), 1.0);
}

GradCheckReport check_trl_gradients(TRL layer, bool batched, std::uint64_t seed, double eps, double tol,
                                    bool corrupt) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const Index b = batched ? 3 : 1;
    Tensor x = batched ? Tensor({b, layer.input_size()}) : Tensor({layer.input_size()});
    Tensor gy = batched ? Tensor({b, layer.output_size()}) : Tensor({layer.output_size()});
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    for (Index i = 0; i < gy.size(); ++i) gy.data()[i] = nd(rng);

    const auto g = trl_backward(layer, x, gy);
    std::vector<Eigen::VectorXd> analytic;
    std::vector<ParamView> views;
    for (Index k = 0; k < layer.cores().order(); ++k) {
        analytic.push_back(g.cores[static_cast<std::size_t>(k)].data());
        views.push_back({"core" + std::to_string(k), span_of(layer.cores().core_data(k))});
    }
    analytic.push_back(g.input->data());
    views.push_back({"x", span_of(x.data())});
    if (corrupt) analytic.front()[0] += 0.1;

    auto loss = [&] { return trl_forward(layer, x).data().dot(gy.data()); };
    return grad_check(loss, views, analytic, eps, tol);
}

GradCheckReport check_lstm_gradients(std::uint64_t seed, double eps, double tol, bool corrupt) {
    auto p = TRLSTMParams::random_ring({2, 2, 2}, {2, 2}, {2, 3, 2, 2, 3}, seed, 0.5);
    std::mt19937_64 rng(seed + 1);
    for (auto& bias : p.b) bias = gaussian(4, 1, rng, 0.5);
    const std::vector<Eigen::MatrixXd> xs{gaussian(8, 1, rng), gaussian(8, 1, rng)};
    const LSTMState s0{gaussian(4, 1, rng, 0.5), gaussian(4, 1, rng, 0.5)};
    const Eigen::MatrixXd w = gaussian(4, 1, rng);

    const auto fwd = run_sequence(p, xs, s0);
    auto analytic = lstm_backward(p, xs, s0, fwd, w).flat();
    if (corrupt) analytic[1][0] += 0.1;
    const auto views = p.views();
    auto loss = [&] { return run_sequence(p, xs, s0).final_h.cwiseProduct(w).sum(); };
    return grad_check(loss, views, analytic, eps, tol);
}

bool GradCheckSuite::passed() const {
    return lstm.passed && std::all_of(layers.begin(), layers.end(), [](const auto& r) { return r.passed; });
}

double GradCheckSuite::worst_layer_error() const {
    double w = 0;
    for (const auto& r : layers) w = std::max(w, r.max_rel_error);
    return w;
}

GradCheckSuite run_gradcheck_suite(const GradCheckConfig& cfg, bool corrupt) {
    std::mt19937_64 rng(cfg.seed);
    GradCheckSuite s;
    for (int i = 0; i < cfg.layers; ++i) {
        auto layer = random_small_layer(rng);
        s.layers.push_back(check_trl_gradients(std::move(layer), i % 2 == 1, rng(), cfg.eps, cfg.tol, corrupt));
    }
    s.lstm = check_lstm_gradients(cfg.seed, cfg.eps, cfg.lstm_tol, corrupt);
    return s;
}

}  // namespace trnn
