// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "trnn/config.hpp"
#include "trnn/training.hpp"
#include "trnn/trl.hpp"

namespace trnn {

/// Random layer with 1..max_n input cores, 1..max_m output cores, mode sizes
/// 1..max_dim and ranks 1..max_rank.
TRL random_small_layer(std::mt19937_64& rng, std::size_t max_n = 3, std::size_t max_m = 3, Index max_dim = 3,
                       Index max_rank = 3);

/// Checks every core gradient and the input gradient of L = <TRL(x), g>
/// against central differences. `corrupt` perturbs one analytic entry.
GradCheckReport check_trl_gradients(TRL layer, bool batched, std::uint64_t seed, double eps, double tol,
                                    bool corrupt = false);

/// BPTT check of a two-step TR-LSTM (I = 8 as 2x2x2, H = 4 as 2x2) on
/// L = <h_T, w>.
GradCheckReport check_lstm_gradients(std::uint64_t seed, double eps, double tol, bool corrupt = false);

struct GradCheckSuite {
    std::vector<GradCheckReport> layers;
    GradCheckReport lstm;
    bool passed() const;
    double worst_layer_error() const;
};

GradCheckSuite run_gradcheck_suite(const GradCheckConfig& cfg, bool corrupt = false);

}  // namespace trnn
