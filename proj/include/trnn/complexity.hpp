// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "trnn/tensor.hpp"

namespace trnn {

enum class SweepVariable { rank, input, output, cores };
enum class SweepModel { dense, tr, tt };
enum class Pass { forward, backward };
/// What a backward point counts: every core and the input gradient, or only
/// the representative interior core k = 2 (1-based), which needs n >= 4.
enum class BackwardScope { representative, total };

const char* to_string(SweepVariable v);
const char* to_string(SweepModel m);
const char* to_string(Pass p);
SweepVariable sweep_variable_from_string(const std::string& s);
SweepModel sweep_model_from_string(const std::string& s);
Pass pass_from_string(const std::string& s);

/// One sweep over a layer family. Shapes not swept come from the fixed fields:
/// n input modes of size `input_mode`, m output modes of size `output_mode`,
/// uniform rank `rank`. Sweeping I (or O) resizes the last input (output) mode,
/// so every value must be a multiple of the remaining modes' product. Sweeping
/// the core count d splits it into ceil(d/2) input and floor(d/2) output cores.
struct SweepSpec {
    SweepVariable variable{SweepVariable::rank};
    std::vector<Index> values{2, 4, 8, 16};
    SweepModel model{SweepModel::tr};
    Pass pass{Pass::forward};
    Index rank{2};
    Index input_mode{4};
    Index output_mode{4};
    std::size_t n{3};
    std::size_t m{3};
    Index batch{1};
    BackwardScope scope{BackwardScope::representative};

    void validate() const;

    /// R in {2, 4, 8, 16}, n = m = 3, modes of size 4.
    static SweepSpec forward_rank();
    /// R in {2, 3, 4, 6}, n = m = 4, modes of size 2, representative core.
    static SweepSpec backward_rank();
    /// I in {64, 128, 256, 512} at R = 2, n = m = 3, modes of size 4.
    static SweepSpec forward_input(SweepModel model = SweepModel::tr);
};

inline constexpr std::size_t kRepresentativeCore = 1;

struct SweepPoint {
    Index value{0};
    Index multiply_adds{0};
    Index peak_scalars{0};
    /// Backward passes of ring models: one report per core gradient.
    std::vector<FlopReport> per_core;
    /// Backward passes of ring models: all cores plus the input gradient.
    FlopReport total;
};

struct SweepReport {
    SweepSpec spec;
    std::vector<SweepPoint> points;
    double flop_slope{0};
    double peak_slope{0};
};

/// Exact operation counts per point from the instrumented kernels, plus the
/// least-squares slope of log(count) against log(value).
SweepReport run_sweep(const SweepSpec& spec);

double loglog_slope(std::span<const double> x, std::span<const double> y);

/// CSV columns variable,value,multiply_adds,peak_scalars; the last row holds the slopes.
std::string sweep_csv(const SweepReport& report);

}  // namespace trnn
