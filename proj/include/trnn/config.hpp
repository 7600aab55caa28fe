// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "trnn/complexity.hpp"
#include "trnn/synth.hpp"
#include "trnn/toytrain.hpp"

namespace trnn {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Factorization plan of one input-to-hidden map.
struct LayerPlan {
    Shape input_dims;
    Shape output_dims;
    /// Ring ranks R_0..R_{n+m-1}.
    std::vector<Index> ranks;

    /// 57600 -> 256 video plan: input 4x2x5x8x6x5x3x2, output 4x4x2x4x2, R_0 = 10, other ranks 5.
    static LayerPlan ucf11();
    void validate() const;
    Index dense_params() const;
    Index ring_params() const;
};

struct GradCheckConfig {
    double eps{1e-5};
    /// Tolerance for tensor ring layer gradients.
    double tol{1e-5};
    /// Tolerance for TR-LSTM BPTT gradients.
    double lstm_tol{1e-4};
    int layers{20};
    std::uint64_t seed{0};
};

struct ExperimentConfig {
    SyntheticConfig synth;
    SweepSpec sweep;
    ToyTaskConfig toy;
    GradCheckConfig gradcheck;
    LayerPlan compress{LayerPlan::ucf11()};
};

/// Parses a JSON experiment config. Sections: synth, fit, sweep, toytrain,
/// gradcheck, compress. Missing keys keep their defaults; unknown keys throw.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Human-readable schema listing every key with its default.
std::string config_schema();

}  // namespace trnn
