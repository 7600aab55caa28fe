// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "trnn/complexity.hpp"

using namespace trnn;

TEST_CASE("loglog_slope of exact power laws") {
    const std::vector<double> x{1, 2, 4, 8};
    std::vector<double> y;
    for (double v : x) y.push_back(3 * std::pow(v, 2.5));
    CHECK(loglog_slope(x, y) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK_THROWS(loglog_slope(std::vector<double>{1}, std::vector<double>{1}));
}

TEST_CASE("forward rank sweep matches the hand-counted schedule") {
    // n = m = 3, modes 4: 64R² (absorb I1) + 16R³ + 4R³ (absorb I2, I3 with a rank)
    // + 4R³ + 16R³ (emit O1, O2) + 64R² (emit O3, close the ring).
    const auto rep = run_sweep(SweepSpec::forward_rank());
    REQUIRE(rep.points.size() == 4);
    for (const auto& p : rep.points) {
        const Index R = p.value;
        CHECK(p.multiply_adds == 128 * R * R + 40 * R * R * R);
        CHECK(p.peak_scalars == 16 * R * R);
    }
    CHECK(rep.flop_slope >= 2.5);
    CHECK(rep.flop_slope <= 3.5);
}

TEST_CASE("representative backward core matches the hand-counted schedule") {
    // Core k = 2 of n = m = 4, modes 2: X·G1 (16R²), ·G3 over I3 (8R⁴), ·G4 over I4 and a
    // rank (4R⁵), ·G5..G7 emitting O1..O3 (4R⁵ + 8R⁵ + 16R⁵), ·G8 closing two ranks (32R⁴),
    // ·∂L/∂Y over O (32R²).
    const auto rep = run_sweep(SweepSpec::backward_rank());
    for (const auto& p : rep.points) {
        const Index R = p.value, R2 = R * R, R4 = R2 * R2;
        CHECK(p.multiply_adds == 48 * R2 + 40 * R4 + 32 * R4 * R);
        CHECK(p.peak_scalars == 16 * R4);
    }
    CHECK(rep.flop_slope >= 4.5);
    CHECK(rep.flop_slope <= 5.5);
    CHECK(rep.peak_slope >= 3.5);
    CHECK(rep.peak_slope <= 4.5);
}

TEST_CASE("the representative core dominates the border cores") {
    const auto rep = run_sweep(SweepSpec::backward_rank());
    for (const auto& p : rep.points) {
        REQUIRE(p.per_core.size() == 8);
        const auto& rep_core = p.per_core[kRepresentativeCore];
        for (std::size_t k : {std::size_t{0}, std::size_t{7}}) {
            CHECK(rep_core.multiply_adds >= p.per_core[k].multiply_adds);
            CHECK(rep_core.peak_intermediate_scalars >= p.per_core[k].peak_intermediate_scalars);
        }
        CHECK(p.total.multiply_adds > p.multiply_adds);
    }
}

TEST_CASE("total backward scope") {
    auto spec = SweepSpec::backward_rank();
    spec.scope = BackwardScope::total;
    const auto rep = run_sweep(spec);
    for (const auto& p : rep.points) {
        Index sum = p.total.multiply_adds;
        CHECK(p.multiply_adds == sum);
        Index cores = 0;
        for (const auto& c : p.per_core) cores += c.multiply_adds;
        CHECK(cores < sum);
    }
    // Lower-order terms keep the whole-pass slope under the leading exponent at desk-scale R.
    CHECK(rep.flop_slope > 3.5);
    CHECK(rep.flop_slope < 5.0);
}

TEST_CASE("dense layer: forward cost linear in I") {
    const auto rep = run_sweep(SweepSpec::forward_input(SweepModel::dense));
    for (const auto& p : rep.points) CHECK(p.multiply_adds == p.value * 64);
    CHECK(rep.flop_slope == doctest::Approx(1.0).epsilon(0.05));

    auto back = SweepSpec::forward_input(SweepModel::dense);
    back.pass = Pass::backward;
    for (const auto& p : run_sweep(back).points) CHECK(p.multiply_adds == 2 * p.value * 64);
}

TEST_CASE("ring forward peak memory is linear in I") {
    const auto rep = run_sweep(SweepSpec::forward_input());
    for (const auto& p : rep.points) CHECK(p.peak_scalars == p.value / 4 * 4);
    CHECK(std::abs(rep.peak_slope - 1.0) <= 0.1);
}

TEST_CASE("counts are deterministic and data independent") {
    const auto a = run_sweep(SweepSpec::backward_rank()), b = run_sweep(SweepSpec::backward_rank());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].multiply_adds == b.points[i].multiply_adds);
        CHECK(a.points[i].peak_scalars == b.points[i].peak_scalars);
    }
    CHECK(sweep_csv(a) == sweep_csv(b));
}

TEST_CASE("other sweep variables and the tt family") {
    SweepSpec o;
    o.variable = SweepVariable::output;
    o.values = {64, 128, 256, 512};
    CHECK(run_sweep(o).flop_slope > 0.5);

    SweepSpec d;
    d.variable = SweepVariable::cores;
    d.values = {2, 4, 6, 8};
    const auto rd = run_sweep(d);
    for (std::size_t i = 1; i < rd.points.size(); ++i)
        CHECK(rd.points[i].multiply_adds > rd.points[i - 1].multiply_adds);

    SweepSpec tt;
    tt.model = SweepModel::tt;
    const auto rt = run_sweep(tt), rr = run_sweep(SweepSpec::forward_rank());
    for (std::size_t i = 0; i < rt.points.size(); ++i)
        CHECK(rt.points[i].multiply_adds < rr.points[i].multiply_adds);
}

TEST_CASE("sweep validation") {
    SweepSpec s;
    s.values = {2, 4, 8};
    CHECK_THROWS(run_sweep(s));
    s.values = {2, 4, 4, 8};
    CHECK_THROWS(run_sweep(s));
    s = SweepSpec{};
    s.model = SweepModel::dense;
    CHECK_THROWS(run_sweep(s));
    s = SweepSpec::forward_input();
    s.values = {64, 100, 128, 256};
    CHECK_THROWS(run_sweep(s));
    s = SweepSpec{};
    s.pass = Pass::backward;
    CHECK_THROWS(run_sweep(s));
    s.scope = BackwardScope::total;
    CHECK_NOTHROW(run_sweep(s));
}

TEST_CASE("sweep CSV") {
    const auto csv = sweep_csv(run_sweep(SweepSpec::forward_rank()));
    CHECK(csv.rfind("variable,value,multiply_adds,peak_scalars\nR,2,832,64\n", 0) == 0);
    const auto last = csv.substr(csv.rfind('\n', csv.size() - 2) + 1);
    CHECK(last.rfind("slope,R,", 0) == 0);
}
