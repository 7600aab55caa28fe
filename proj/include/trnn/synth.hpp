// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trnn/formats.hpp"
#include "trnn/training.hpp"

namespace trnn {

enum class WeightRegime {
    ring,    // dense reconstruction of a random uniform-rank TR
    matrix,  // A·Bᵀ with matrix rank gen_rank
};

struct SyntheticConfig {
    Index dim{81};
    Index n_samples{3200};
    double input_variance{0.5};
    std::vector<double> noise_sigmas{0.05};
    Index gen_rank{3};
    WeightRegime regime{WeightRegime::ring};
    Shape input_dims{3, 3, 3, 3};
    Shape output_dims{3, 3, 3, 3};
    /// Ring ranks for the tr model; empty means gen_rank everywhere.
    std::vector<Index> tr_ranks;
    /// Train ranks R_0..R_d for the tt model; empty means the default budget-matched profile.
    std::vector<Index> tt_ranks;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<ModelKind> models{ModelKind::linear, ModelKind::tt, ModelKind::tr};
    FitConfig fit;
    /// Element variance of the initial TT/TR weight.
    double init_variance{0.1};
    /// When false wall_ms is reported as 0 so reports are byte-reproducible.
    bool record_wall_time{true};

    void validate() const;
    ModelSpec model_spec(ModelKind kind) const;
    std::vector<Index> default_tt_ranks() const;
};

struct SyntheticWeight {
    Eigen::MatrixXd W;  // O×I
    std::optional<TR> generator;
};

/// Deterministic 64-bit stream key derived from a user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// W with unit root-mean-square entries.
SyntheticWeight generate_lowrank_weight(const SyntheticConfig& cfg, std::uint64_t seed);

/// Rows x ~ N(0, input_variance·I), y = W x + ε with ε ~ N(0, σ²I).
Dataset generate_dataset(const Eigen::MatrixXd& W, const SyntheticConfig& cfg, double sigma,
                         std::uint64_t seed);

struct RecoveryCell {
    ModelKind model{ModelKind::linear};
    double sigma{0};
    std::uint64_t seed{0};
    double rmse{0};
    Index params{0};
    int epochs{0};
    double wall_ms{0};
    bool diverged{false};
};

struct RecoverySummaryRow {
    ModelKind model{ModelKind::linear};
    double sigma{0};
    double median_rmse{0};
    Index params{0};
    int diverged{0};
};

struct RecoveryReport {
    std::vector<RecoveryCell> cells;
    /// Truth and estimates for the first (σ, seed) pair.
    Eigen::MatrixXd example_truth;
    std::map<ModelKind, Eigen::MatrixXd> example_estimates;

    std::vector<RecoverySummaryRow> summary() const;
    double median_rmse(ModelKind model, double sigma) const;
    /// Number of seeds at σ where `a` has strictly lower RMSE than `b`.
    int wins(ModelKind a, ModelKind b, double sigma) const;
    int diverged_cells() const;
};

/// Fits every (σ, seed, model) cell. Cells are independent and fanned out over
/// `jobs` worker threads; results are ordered by (σ, seed, model) regardless.
RecoveryReport run_recovery(const SyntheticConfig& cfg, unsigned jobs = 1);

/// CSV header: model,sigma,seed,rmse,params,epochs,wall_ms
std::string recovery_csv(const RecoveryReport& report);
std::string recovery_summary_text(const RecoveryReport& report);
std::string matrix_csv(const Eigen::MatrixXd& m);

/// Runs `count` tasks over a fixed pool of `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task);

}  // namespace trnn
