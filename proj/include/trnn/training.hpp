// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trnn/formats.hpp"

namespace trnn {

double mse_loss(const Eigen::Ref<const Eigen::VectorXd>& pred,
                const Eigen::Ref<const Eigen::VectorXd>& target);

double rmse_matrix(const Eigen::Ref<const Eigen::MatrixXd>& a,
                   const Eigen::Ref<const Eigen::MatrixXd>& b);

// ---------------------------------------------------------------------------
// Gradient checking

/// A named block of scalars the checker may perturb in place.
struct ParamView {
    std::string name;
    std::span<double> values;
};

struct GradCheckEntry {
    std::string parameter;
    Index index{0};
    double analytic{0};
    double numeric{0};
    double rel_error{0};
};

struct GradCheckReport {
    double eps{0};
    double tolerance{0};
    double max_rel_error{0};
    /// "name[index]" of the scalar with the largest error.
    std::string worst_parameter;
    Index checked{0};
    bool passed{false};
    std::vector<GradCheckEntry> failures;
};

/// Compares `analytic[b][i]` with the central difference of `loss` in
/// `params[b].values[i]`. The relative error is |a - n| / max(|a|, |n|, 1e-4);
/// the floor keeps round-off on vanishing gradients from reading as failure.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<const ParamView> params,
                           std::span<const Eigen::VectorXd> analytic, double eps, double tolerance);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind{OptimizerKind::adam};
    double learning_rate{1e-2};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
};

/// First-order optimizer over independently sized parameter blocks.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    /// Advances the shared step counter; call once before each round of updates.
    void begin_step() { ++step_; }
    void update(std::size_t block, Eigen::Ref<Eigen::VectorXd> param,
                const Eigen::Ref<const Eigen::VectorXd>& grad);

private:
    OptimizerConfig cfg_;
    long step_{0};
    std::vector<Eigen::VectorXd> m_, v_;
};

// ---------------------------------------------------------------------------
// Regression fitting

enum class ModelKind { linear, tt, tr };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct FitConfig {
    double learning_rate{1e-2};
    int epochs{2000};
    /// 0 means full batch.
    Index batch_size{0};
    std::uint64_t seed{0};
    OptimizerKind optimizer{OptimizerKind::adam};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};

    void validate() const;
    OptimizerConfig optimizer_config() const {
        return {optimizer, learning_rate, beta1, beta2, epsilon};
    }
};

/// Model class for y = W x with W ∈ R^{O×I}.
///
/// For `tr`, `ranks` lists R_0..R_{d-1} over the n input then m output cores.
/// For `tt`, it lists R_0..R_d with both borders equal to 1.
struct ModelSpec {
    ModelKind kind{ModelKind::linear};
    Shape input_dims;
    Shape output_dims;
    std::vector<Index> ranks;
    /// Element variance of the initial reconstructed weight tensor.
    double init_variance{1.0};

    Index input_size() const { return volume(input_dims); }
    Index output_size() const { return volume(output_dims); }
    /// Ring ranks (closing rank 1 for a train).
    std::vector<Index> ring_ranks() const;
    Index param_count() const;
};

/// Row-wise samples: X is N×I, Y is N×O.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;
};

struct EpochRecord {
    int epoch{0};
    double loss{0};
    double wall_ms{0};
};

struct FitResult {
    ModelKind kind{ModelKind::linear};
    /// O×I, y = W x.
    Eigen::MatrixXd weight;
    std::optional<TR> ring;
    Index params{0};
    std::vector<EpochRecord> trace;
    bool diverged{false};
    double final_loss{0};
};

/// Minimizes mean((X Wᵀ - Y)^2) over the model class; no regularization.
/// Full-batch epochs use the sufficient statistics XᵀX, XᵀY, ||Y||².
FitResult fit_model(const ModelSpec& model, const Dataset& data, const FitConfig& cfg);

/// Least-squares W (O×I) via the normal equations.
Eigen::MatrixXd solve_normal_equations(const Dataset& data);

/// CSV with header "epoch,loss,wall_ms".
std::string loss_trace_csv(const FitResult& fit);

}  // namespace trnn
