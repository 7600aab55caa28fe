// SPDX-License-Identifier: Apache-2.0
#include "trnn/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace trnn {

void SyntheticConfig::validate() const {
    if (dim < 1 || n_samples < 1) throw std::invalid_argument("synth: dim and n_samples must be positive");
    if (!(input_variance > 0)) throw std::invalid_argument("synth: input_variance must be positive");
    if (gen_rank < 1) throw std::invalid_argument("synth: gen_rank must be >= 1");
    if (volume(input_dims) != dim || volume(output_dims) != dim)
        throw std::invalid_argument("synth: tensorization " + to_string(input_dims) + " x " +
                                    to_string(output_dims) + " does not multiply out to dim " +
                                    std::to_string(dim));
    for (double s : noise_sigmas)
        if (!(s >= 0)) throw std::invalid_argument("synth: noise sigma must be >= 0");
    if (noise_sigmas.empty() || seeds.empty() || models.empty())
        throw std::invalid_argument("synth: noise_sigmas, seeds and models must be non-empty");
    if (!(init_variance > 0)) throw std::invalid_argument("synth: init_variance must be positive");
    fit.validate();
    for (auto m : models) model_spec(m).ring_ranks();
}

std::vector<Index> SyntheticConfig::default_tt_ranks() const {
    // Open chain with interior ranks growing toward the middle so that the
    // parameter count sits just above the uniform ring of rank gen_rank.
    const std::size_t d = input_dims.size() + output_dims.size();
    std::vector<Index> r(d + 1, gen_rank);
    r.front() = r.back() = 1;
    for (std::size_t k = 3; k + 3 <= d; ++k) r[k] = gen_rank + 1;
    return r;
}

ModelSpec SyntheticConfig::model_spec(ModelKind kind) const {
    ModelSpec spec{kind, input_dims, output_dims, {}, init_variance};
    const std::size_t d = input_dims.size() + output_dims.size();
    if (kind == ModelKind::tr) spec.ranks = tr_ranks.empty() ? std::vector<Index>(d, gen_rank) : tr_ranks;
    if (kind == ModelKind::tt) spec.ranks = tt_ranks.empty() ? default_tt_ranks() : tt_ranks;
    return spec;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined key
    std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + (stream + 1) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {
enum Stream : std::uint64_t { kWeight = 0, kInputs = 1, kNoise = 2, kInit = 3 };
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}  // namespace

SyntheticWeight generate_lowrank_weight(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (cfg.gen_rank < 1) throw std::invalid_argument("generate_lowrank_weight: gen_rank must be >= 1");
    SyntheticWeight out;
    const std::uint64_t key = derive_seed(seed, kWeight);
    if (cfg.regime == WeightRegime::ring) {
        Shape dims = cfg.input_dims;
        dims.insert(dims.end(), cfg.output_dims.begin(), cfg.output_dims.end());
        auto ring = random_tr(dims, std::vector<Index>(dims.size(), cfg.gen_rank), key);
        const auto dense = tr_reconstruct(ring);
        const Index I = volume(cfg.input_dims), O = volume(cfg.output_dims);
        out.W = Eigen::Map<const RowMat>(dense.data().data(), I, O).transpose();
        out.generator = std::move(ring);
    } else {
        std::mt19937_64 rng(key);
        std::normal_distribution<double> n01;
        Eigen::MatrixXd A(cfg.dim, cfg.gen_rank), B(cfg.dim, cfg.gen_rank);
        for (Index i = 0; i < A.size(); ++i) A.data()[i] = n01(rng);
        for (Index i = 0; i < B.size(); ++i) B.data()[i] = n01(rng);
        out.W = A * B.transpose();
    }
    const double rms = std::sqrt(out.W.squaredNorm() / static_cast<double>(out.W.size()));
    out.W /= rms;
    if (out.generator) {
        // Spread the rescale evenly so the generator reconstructs the scaled W.
        const double per_core = std::pow(rms, -1.0 / static_cast<double>(out.generator->order()));
        for (Index k = 0; k < out.generator->order(); ++k) out.generator->core_data(k) *= per_core;
    }
    return out;
}

Dataset generate_dataset(const Eigen::MatrixXd& W, const SyntheticConfig& cfg, double sigma,
                         std::uint64_t seed) {
    if (!(sigma >= 0)) throw std::invalid_argument("generate_dataset: sigma must be >= 0");
    std::mt19937_64 xr(derive_seed(seed, kInputs)), nr(derive_seed(seed, kNoise));
    std::normal_distribution<double> xd(0.0, std::sqrt(cfg.input_variance)), nd(0.0, 1.0);
    Dataset data;
    data.X.resize(cfg.n_samples, W.cols());
    for (Index i = 0; i < data.X.rows(); ++i)
        for (Index j = 0; j < data.X.cols(); ++j) data.X(i, j) = xd(xr);
    data.Y = data.X * W.transpose();
    if (sigma > 0)
        for (Index i = 0; i < data.Y.rows(); ++i)
            for (Index j = 0; j < data.Y.cols(); ++j) data.Y(i, j) += sigma * nd(nr);
    return data;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < count;) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

RecoveryReport run_recovery(const SyntheticConfig& cfg, unsigned jobs) {
    cfg.validate();
    const std::size_t n_models = cfg.models.size();
    const std::size_t n_cells = cfg.noise_sigmas.size() * cfg.seeds.size() * n_models;

    RecoveryReport report;
    report.cells.resize(n_cells);
    std::vector<Eigen::MatrixXd> example(n_models);

    parallel_for(n_cells, jobs, [&](std::size_t idx) {
        const std::size_t mi = idx % n_models;
        const std::size_t si = (idx / n_models) % cfg.seeds.size();
        const std::size_t gi = idx / (n_models * cfg.seeds.size());
        const double sigma = cfg.noise_sigmas[gi];
        const std::uint64_t seed = cfg.seeds[si];
        const ModelKind kind = cfg.models[mi];

        const auto truth = generate_lowrank_weight(cfg, seed);
        const auto data = generate_dataset(truth.W, cfg, sigma, seed);
        FitConfig fit = cfg.fit;
        fit.seed = derive_seed(seed, kInit);
        const auto result = fit_model(cfg.model_spec(kind), data, fit);

        RecoveryCell& cell = report.cells[idx];
        cell.model = kind;
        cell.sigma = sigma;
        cell.seed = seed;
        cell.params = result.params;
        cell.epochs = static_cast<int>(result.trace.size());
        cell.wall_ms = cfg.record_wall_time ? result.trace.back().wall_ms : 0.0;
        cell.diverged = result.diverged;
        cell.rmse = result.diverged ? std::numeric_limits<double>::quiet_NaN()
                                    : rmse_matrix(result.weight, truth.W);
        if (gi == 0 && si == 0) example[mi] = result.weight;
    });

    report.example_truth = generate_lowrank_weight(cfg, cfg.seeds.front()).W;
    for (std::size_t mi = 0; mi < n_models; ++mi) report.example_estimates[cfg.models[mi]] = example[mi];
    return report;
}

namespace {
double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}
}  // namespace

double RecoveryReport::median_rmse(ModelKind model, double sigma) const {
    std::vector<double> v;
    for (const auto& c : cells)
        if (c.model == model && c.sigma == sigma && !c.diverged) v.push_back(c.rmse);
    return median(std::move(v));
}

int RecoveryReport::wins(ModelKind a, ModelKind b, double sigma) const {
    std::map<std::uint64_t, double> ra, rb;
    for (const auto& c : cells) {
        if (c.sigma != sigma || c.diverged) continue;
        if (c.model == a) ra[c.seed] = c.rmse;
        if (c.model == b) rb[c.seed] = c.rmse;
    }
    int n = 0;
    for (const auto& [seed, r] : ra)
        if (auto it = rb.find(seed); it != rb.end() && r < it->second) ++n;
    return n;
}

int RecoveryReport::diverged_cells() const {
    return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.diverged; }));
}

std::vector<RecoverySummaryRow> RecoveryReport::summary() const {
    std::vector<RecoverySummaryRow> rows;
    for (const auto& c : cells) {
        auto it = std::find_if(rows.begin(), rows.end(),
                               [&](const auto& r) { return r.model == c.model && r.sigma == c.sigma; });
        if (it == rows.end()) {
            rows.push_back({c.model, c.sigma, median_rmse(c.model, c.sigma), c.params, 0});
            it = rows.end() - 1;
        }
        if (c.diverged) ++it->diverged;
    }
    return rows;
}

std::string recovery_csv(const RecoveryReport& report) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "model,sigma,seed,rmse,params,epochs,wall_ms\n";
    for (const auto& c : report.cells)
        os << to_string(c.model) << ',' << c.sigma << ',' << c.seed << ',' << c.rmse << ',' << c.params
           << ',' << c.epochs << ',' << c.wall_ms << '\n';
    return os.str();
}

std::string recovery_summary_text(const RecoveryReport& report) {
    std::ostringstream os;
    os << "model    sigma    median_rmse  params  diverged\n";
    for (const auto& r : report.summary())
        os << std::left << std::setw(8) << to_string(r.model) << ' ' << std::setw(8) << r.sigma << ' '
           << std::setw(12) << std::fixed << std::setprecision(6) << r.median_rmse << ' '
           << std::defaultfloat << std::setprecision(6) << std::setw(7) << r.params << ' ' << r.diverged
           << '\n';
    return os.str();
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
        os << '\n';
    }
    return os.str();
}

}  // namespace trnn
