// SPDX-License-Identifier: Apache-2.0
#include "trnn/toytrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "trnn/synth.hpp"

namespace trnn {

void ToyTaskConfig::validate() const {
    if (classes < 2) throw std::invalid_argument("toytrain: need at least 2 classes");
    if (steps < 1) throw std::invalid_argument("toytrain: steps must be >= 1");
    if (train_samples < 1 || test_samples < 1 || batch < 1 || epochs < 1)
        throw std::invalid_argument("toytrain: sample counts, batch and epochs must be positive");
    if (!(learning_rate > 0)) throw std::invalid_argument("toytrain: learning_rate must be > 0");
    if (!(noise >= 0)) throw std::invalid_argument("toytrain: noise must be >= 0");
    if (input_dims.empty() || hidden_dims.empty()) throw std::invalid_argument("toytrain: empty tensorization");
    if (ring_ranks().size() != input_dims.size() + hidden_dims.size())
        throw std::invalid_argument("toytrain: need one rank per core");
}

std::vector<Index> ToyTaskConfig::ring_ranks() const {
    return ranks.empty() ? std::vector<Index>(input_dims.size() + hidden_dims.size(), 2) : ranks;
}

namespace {

SequenceSet sample_set(const std::vector<Eigen::VectorXd>& prototypes, const ToyTaskConfig& cfg, Index n,
                       std::mt19937_64& rng) {
    const Index I = prototypes.front().size();
    std::normal_distribution<double> nd(0.0, cfg.noise);
    std::uniform_int_distribution<int> cls(0, static_cast<int>(cfg.classes) - 1);
    std::uniform_int_distribution<Index> when(0, cfg.steps - 1);
    SequenceSet s;
    s.steps.assign(static_cast<std::size_t>(cfg.steps), Eigen::MatrixXd(I, n));
    for (auto& m : s.steps)
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    for (Index j = 0; j < n; ++j) {
        const int label = cls(rng);
        s.labels.push_back(label);
        s.steps[static_cast<std::size_t>(when(rng))].col(j) += prototypes[static_cast<std::size_t>(label)];
    }
    return s;
}

std::vector<Eigen::MatrixXd> columns(const std::vector<Eigen::MatrixXd>& steps, const std::vector<Index>& idx) {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& m : steps) {
        Eigen::MatrixXd b(m.rows(), static_cast<Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) b.col(static_cast<Index>(j)) = m.col(idx[j]);
        out.push_back(std::move(b));
    }
    return out;
}

Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd p = z.rowwise() - z.colwise().maxCoeff();
    p = p.array().exp();
    return p.array().rowwise() / p.colwise().sum().array();
}

}  // namespace

ToyData generate_toy_data(const ToyTaskConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(cfg.seed, 10));
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<Eigen::VectorXd> prototypes;
    for (Index c = 0; c < cfg.classes; ++c) {
        // Rank-1 tensor of ±1 factors: unit-magnitude entries, sign pattern per class.
        Eigen::VectorXd p = Eigen::VectorXd::Ones(1);
        for (Index dim : cfg.input_dims) {
            Eigen::VectorXd f(dim);
            for (Index i = 0; i < dim; ++i) f(i) = coin(rng) ? 1.0 : -1.0;
            Eigen::VectorXd next(p.size() * dim);
            for (Index a = 0; a < p.size(); ++a) next.segment(a * dim, dim) = p(a) * f;
            p = std::move(next);
        }
        prototypes.push_back(std::move(p));
    }
    ToyData d;
    d.train = sample_set(prototypes, cfg, cfg.train_samples, rng);
    d.test = sample_set(prototypes, cfg, cfg.test_samples, rng);
    return d;
}

Eigen::MatrixXd SequenceClassifier::logits(const std::vector<Eigen::MatrixXd>& xs) const {
    Eigen::MatrixXd z = V * run_sequence(lstm, xs).final_h;
    z.colwise() += c;
    return z;
}

double SequenceClassifier::accuracy(const SequenceSet& data) const {
    const auto z = logits(data.steps);
    Index correct = 0;
    for (Index j = 0; j < z.cols(); ++j) {
        Index best;
        z.col(j).maxCoeff(&best);
        if (best == data.labels[static_cast<std::size_t>(j)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(z.cols());
}

ToyModelResult train_classifier(SequenceClassifier& model, const ToyData& data, const ToyTaskConfig& cfg) {
    Optimizer opt({OptimizerKind::adam, cfg.learning_rate});
    std::mt19937_64 rng(derive_seed(cfg.seed, 11));
    const Index N = static_cast<Index>(data.train.labels.size());
    std::vector<Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Index{0});

    ToyModelResult result;
    result.input_params = model.lstm.input_param_count();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0;
        for (Index off = 0; off < N; off += cfg.batch) {
            const std::vector<Index> idx(order.begin() + off, order.begin() + std::min(N, off + cfg.batch));
            const Index B = static_cast<Index>(idx.size());
            const auto xs = columns(data.train.steps, idx);
            const LSTMState s0 = LSTMState::zeros(model.lstm.hidden_size(), B);
            const auto fwd = run_sequence(model.lstm, xs, s0);
            Eigen::MatrixXd z = model.V * fwd.final_h;
            z.colwise() += model.c;
            Eigen::MatrixXd dz = softmax_cols(z);
            for (Index j = 0; j < B; ++j) {
                const int y = data.train.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
                total -= std::log(std::max(dz(y, j), 1e-300));
                dz(y, j) -= 1.0;
            }
            dz /= static_cast<double>(B);

            const Eigen::MatrixXd dV = dz * fwd.final_h.transpose();
            const Eigen::VectorXd dc = dz.rowwise().sum();
            auto grads = lstm_backward(model.lstm, xs, s0, fwd, model.V.transpose() * dz).flat();
            grads.push_back(Eigen::Map<const Eigen::VectorXd>(dV.data(), dV.size()));
            grads.push_back(dc);

            auto views = model.lstm.views();
            views.push_back({"V", {model.V.data(), static_cast<std::size_t>(model.V.size())}});
            views.push_back({"c", {model.c.data(), static_cast<std::size_t>(model.c.size())}});
            opt.begin_step();
            for (std::size_t b = 0; b < views.size(); ++b)
                opt.update(b, Eigen::Map<Eigen::VectorXd>(views[b].values.data(), static_cast<Index>(views[b].values.size())),
                           grads[b]);
        }
        result.epoch_loss.push_back(total / static_cast<double>(N));
    }
    result.accuracy = model.accuracy(data.test);
    return result;
}

ToyTrainResult run_toytrain(const ToyTaskConfig& cfg) {
    cfg.validate();
    const auto data = generate_toy_data(cfg);
    const Index I = volume(cfg.input_dims), H = volume(cfg.hidden_dims);
    std::mt19937_64 rng(derive_seed(cfg.seed, 12));
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(H)));
    auto readout = [&](SequenceClassifier& m) {
        m.V.resize(cfg.classes, H);
        for (Index i = 0; i < m.V.size(); ++i) m.V.data()[i] = nd(rng);
        m.c = Eigen::VectorXd::Zero(cfg.classes);
    };

    SequenceClassifier ring{TRLSTMParams::random_ring(cfg.input_dims, cfg.hidden_dims, cfg.ring_ranks(),
                                                      derive_seed(cfg.seed, 13), cfg.forget_bias),
                            {}, {}};
    readout(ring);
    SequenceClassifier dense{TRLSTMParams::random_dense(I, H, derive_seed(cfg.seed, 14), cfg.forget_bias), {}, {}};
    readout(dense);

    ToyTrainResult r;
    r.ring = train_classifier(ring, data, cfg);
    r.dense = train_classifier(dense, data, cfg);
    r.param_fraction = static_cast<double>(r.ring.input_params) / static_cast<double>(r.dense.input_params);
    return r;
}

}  // namespace trnn
