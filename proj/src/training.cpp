// SPDX-License-Identifier: Apache-2.0
#include "trnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace trnn {

double mse_loss(const Eigen::Ref<const Eigen::VectorXd>& pred,
                const Eigen::Ref<const Eigen::VectorXd>& target) {
    if (pred.size() != target.size() || pred.size() == 0)
        throw ShapeError("mse_loss: length mismatch (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(target.size()) + ")");
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double rmse_matrix(const Eigen::Ref<const Eigen::MatrixXd>& a,
                   const Eigen::Ref<const Eigen::MatrixXd>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.size() == 0)
        throw ShapeError("rmse_matrix: shape mismatch");
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

GradCheckReport grad_check(const std::function<double()>& loss, std::span<const ParamView> params,
                           std::span<const Eigen::VectorXd> analytic, double eps, double tolerance) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
    if (params.size() != analytic.size())
        throw std::invalid_argument("grad_check: one analytic gradient per parameter block required");

    GradCheckReport report;
    report.eps = eps;
    report.tolerance = tolerance;
    for (std::size_t b = 0; b < params.size(); ++b) {
        const auto& view = params[b];
        if (static_cast<Index>(view.values.size()) != analytic[b].size())
            throw std::invalid_argument("grad_check: size mismatch for " + view.name);
        for (std::size_t i = 0; i < view.values.size(); ++i) {
            double& x = view.values[i];
            const double saved = x;
            x = saved + eps;
            const double up = loss();
            x = saved - eps;
            const double down = loss();
            x = saved;
            const double numeric = (up - down) / (2 * eps);
            const double a = analytic[b][static_cast<Index>(i)];
            const double err =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
            ++report.checked;
            const std::string label = view.name + "[" + std::to_string(i) + "]";
            if (!(err <= report.max_rel_error) || report.worst_parameter.empty()) {
                if (!(err <= report.max_rel_error)) report.max_rel_error = err;
                report.worst_parameter = label;
            }
            if (!(err <= tolerance))
                report.failures.push_back({view.name, static_cast<Index>(i), a, numeric, err});
        }
    }
    report.passed = report.failures.empty();
    return report;
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    if (!(cfg_.learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
}

void Optimizer::update(std::size_t block, Eigen::Ref<Eigen::VectorXd> param,
                       const Eigen::Ref<const Eigen::VectorXd>& grad) {
    if (cfg_.kind == OptimizerKind::sgd) {
        param -= cfg_.learning_rate * grad;
        return;
    }
    if (block >= m_.size()) {
        m_.resize(block + 1);
        v_.resize(block + 1);
    }
    if (m_[block].size() != param.size()) {
        m_[block] = Eigen::VectorXd::Zero(param.size());
        v_[block] = Eigen::VectorXd::Zero(param.size());
    }
    auto& m = m_[block];
    auto& v = v_[block];
    m = cfg_.beta1 * m + (1 - cfg_.beta1) * grad;
    v = cfg_.beta2 * v + (1 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1 - std::pow(cfg_.beta2, static_cast<double>(step_));
    param.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear: return "linear";
        case ModelKind::tt: return "tt";
        case ModelKind::tr: return "tr";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "linear") return ModelKind::linear;
    if (s == "tt") return ModelKind::tt;
    if (s == "tr") return ModelKind::tr;
    throw std::invalid_argument("unknown model kind '" + s + "' (expected linear, tt or tr)");
}

void FitConfig::validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("FitConfig: learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("FitConfig: epochs must be >= 1");
    if (batch_size < 0) throw std::invalid_argument("FitConfig: batch_size must be >= 0");
}

std::vector<Index> ModelSpec::ring_ranks() const {
    const std::size_t d = input_dims.size() + output_dims.size();
    switch (kind) {
        case ModelKind::linear: return {};
        case ModelKind::tr:
            if (ranks.size() != d)
                throw std::invalid_argument("tr model: expected " + std::to_string(d) + " ring ranks");
            return ranks;
        case ModelKind::tt:
            if (ranks.size() != d + 1 || ranks.front() != 1 || ranks.back() != 1)
                throw std::invalid_argument("tt model: expected " + std::to_string(d + 1) +
                                            " ranks with unit borders");
            return {ranks.begin(), ranks.end() - 1};
    }
    return {};
}

Index ModelSpec::param_count() const {
    if (kind == ModelKind::linear) return input_size() * output_size();
    const auto r = ring_ranks();
    Shape dims = input_dims;
    dims.insert(dims.end(), output_dims.begin(), output_dims.end());
    Index total = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) total += r[k] * dims[k] * r[(k + 1) % dims.size()];
    return total;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Moments {
    Eigen::MatrixXd xx;  // XᵀX
    Eigen::MatrixXd xy;  // XᵀY
    double yy{0};
    double scale{0};  // 1 / (N·O)
};

Moments moments(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    Moments m;
    m.xx = X.transpose() * X;
    m.xy = X.transpose() * Y;
    m.yy = Y.squaredNorm();
    m.scale = 1.0 / static_cast<double>(X.rows() * Y.cols());
    return m;
}

// Loss and ∂loss/∂M for y = Mᵀ x with M ∈ R^{I×O}.
double full_loss(const Moments& s, const Eigen::MatrixXd& M, Eigen::MatrixXd* grad) {
    const Eigen::MatrixXd sxm = s.xx * M;
    const double loss = s.scale * ((M.cwiseProduct(sxm)).sum() - 2 * M.cwiseProduct(s.xy).sum() + s.yy);
    if (grad) *grad = 2 * s.scale * (sxm - s.xy);
    return loss;
}

Eigen::MatrixXd batch_grad(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           const std::vector<Index>& rows, const Eigen::MatrixXd& M) {
    Eigen::MatrixXd xb(static_cast<Index>(rows.size()), X.cols()), yb(static_cast<Index>(rows.size()), Y.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        xb.row(static_cast<Index>(r)) = X.row(rows[r]);
        yb.row(static_cast<Index>(r)) = Y.row(rows[r]);
    }
    const double scale = 2.0 / static_cast<double>(xb.rows() * Y.cols());
    return scale * xb.transpose() * (xb * M - yb);
}

Eigen::MatrixXd unfold(const TR& ring, Index rows, Index cols) {
    const auto w = tr_reconstruct(ring);
    return Eigen::Map<const RowMat>(w.data().data(), rows, cols);
}

}  // namespace

FitResult fit_model(const ModelSpec& model, const Dataset& data, const FitConfig& cfg) {
    cfg.validate();
    const Index I = model.input_size(), O = model.output_size();
    if (data.X.cols() != I || data.Y.cols() != O || data.X.rows() != data.Y.rows() || data.X.rows() == 0)
        throw ShapeError("fit_model: data shapes X " + std::to_string(data.X.rows()) + "x" +
                         std::to_string(data.X.cols()) + ", Y " + std::to_string(data.Y.rows()) + "x" +
                         std::to_string(data.Y.cols()) + " do not match the model (" +
                         std::to_string(I) + " -> " + std::to_string(O) + ")");

    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    };

    const Index N = data.X.rows();
    const Index batch = (cfg.batch_size == 0 || cfg.batch_size >= N) ? N : cfg.batch_size;
    const Moments stats = moments(data.X, data.Y);
    std::mt19937_64 rng(cfg.seed);

    FitResult result;
    result.kind = model.kind;
    result.params = model.param_count();

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(I, O);
    std::optional<TR> ring;
    Shape dims = model.input_dims;
    dims.insert(dims.end(), model.output_dims.begin(), model.output_dims.end());
    if (model.kind != ModelKind::linear) {
        ring = random_tr(dims, model.ring_ranks(), rng(), model.init_variance);
        M = unfold(*ring, I, O);
    }

    Optimizer opt(cfg.optimizer_config());
    std::vector<Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Index{0});

    auto apply_gradient = [&](const Eigen::MatrixXd& dM) {
        opt.begin_step();
        if (!ring) {
            Eigen::Map<Eigen::VectorXd> p(M.data(), M.size());
            opt.update(0, p, Eigen::Map<const Eigen::VectorXd>(dM.data(), dM.size()));
            return;
        }
        // ∂loss/∂W as a row-major tensor over (input modes, output modes).
        const RowMat dm_rows = dM;
        const Tensor g(dims, Eigen::Map<const Eigen::VectorXd>(dm_rows.data(), dm_rows.size()));
        const auto core_grads = tr_reconstruct_vjp(*ring, g);
        for (Index k = 0; k < ring->order(); ++k)
            opt.update(static_cast<std::size_t>(k), ring->core_data(k),
                       core_grads[static_cast<std::size_t>(k)].data());
        M = unfold(*ring, I, O);
    };

    Eigen::MatrixXd dM;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (batch == N) {
            full_loss(stats, M, &dM);
            apply_gradient(dM);
        } else {
            std::shuffle(order.begin(), order.end(), rng);
            for (Index off = 0; off < N; off += batch) {
                const std::vector<Index> rows(order.begin() + off, order.begin() + std::min(N, off + batch));
                apply_gradient(batch_grad(data.X, data.Y, rows, M));
            }
        }
        const double loss = full_loss(stats, M, nullptr);
        result.trace.push_back({epoch, loss, elapsed_ms()});
        if (!std::isfinite(loss)) {
            result.diverged = true;
            break;
        }
    }

    result.weight = M.transpose();
    result.ring = std::move(ring);
    result.final_loss = result.trace.back().loss;
    return result;
}

Eigen::MatrixXd solve_normal_equations(const Dataset& data) {
    const Eigen::MatrixXd xx = data.X.transpose() * data.X;
    const Eigen::MatrixXd xy = data.X.transpose() * data.Y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xx);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("normal equations: factorization failed");
    return ldlt.solve(xy).transpose();
}

std::string loss_trace_csv(const FitResult& fit) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,loss,wall_ms\n";
    for (const auto& r : fit.trace) os << r.epoch << ',' << r.loss << ',' << r.wall_ms << '\n';
    return os.str();
}

}  // namespace trnn
