// SPDX-License-Identifier: Apache-2.0
#include "trnn/complexity.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "trnn/trl.hpp"

namespace trnn {

const char* to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::rank: return "R";
        case SweepVariable::input: return "I";
        case SweepVariable::output: return "O";
        case SweepVariable::cores: return "d";
    }
    return "?";
}

const char* to_string(SweepModel m) {
    switch (m) {
        case SweepModel::dense: return "dense";
        case SweepModel::tr: return "tr";
        case SweepModel::tt: return "tt";
    }
    return "?";
}

const char* to_string(Pass p) { return p == Pass::forward ? "forward" : "backward"; }

SweepVariable sweep_variable_from_string(const std::string& s) {
    if (s == "R" || s == "rank") return SweepVariable::rank;
    if (s == "I" || s == "input") return SweepVariable::input;
    if (s == "O" || s == "output") return SweepVariable::output;
    if (s == "d" || s == "cores") return SweepVariable::cores;
    throw std::invalid_argument("unknown sweep variable '" + s + "' (expected R, I, O or d)");
}

SweepModel sweep_model_from_string(const std::string& s) {
    if (s == "dense") return SweepModel::dense;
    if (s == "tr") return SweepModel::tr;
    if (s == "tt") return SweepModel::tt;
    throw std::invalid_argument("unknown sweep model '" + s + "' (expected dense, tr or tt)");
}

Pass pass_from_string(const std::string& s) {
    if (s == "forward") return Pass::forward;
    if (s == "backward") return Pass::backward;
    throw std::invalid_argument("unknown pass '" + s + "' (expected forward or backward)");
}

namespace {

struct LayerShape {
    Shape in, out;
    Index rank;
};

Index mode_product(std::size_t count, Index mode) {
    Index p = 1;
    for (std::size_t i = 0; i < count; ++i) p *= mode;
    return p;
}

LayerShape shape_at(const SweepSpec& s, Index value) {
    LayerShape ls{Shape(s.n, s.input_mode), Shape(s.m, s.output_mode), s.rank};
    switch (s.variable) {
        case SweepVariable::rank: ls.rank = value; break;
        case SweepVariable::input: ls.in.back() = value / mode_product(s.n - 1, s.input_mode); break;
        case SweepVariable::output: ls.out.back() = value / mode_product(s.m - 1, s.output_mode); break;
        case SweepVariable::cores: {
            const auto d = static_cast<std::size_t>(value);
            ls.in.assign((d + 1) / 2, s.input_mode);
            ls.out.assign(d / 2, s.output_mode);
            break;
        }
    }
    return ls;
}

SweepPoint measure(const SweepSpec& s, Index value) {
    const auto ls = shape_at(s, value);
    const Index I = volume(ls.in), O = volume(ls.out);
    SweepPoint pt;
    pt.value = value;

    if (s.model == SweepModel::dense) {
        const Tensor x({s.batch, I}), w({I, O});
        FlopReport r;
        if (s.pass == Pass::forward) {
            contract(x, w, {1}, {0}, &r);
        } else {
            const Tensor gy({s.batch, O});
            contract(x, gy, {0}, {0}, &r);  // ∂W
            contract(gy, w, {1}, {1}, &r);  // ∂x
        }
        pt.multiply_adds = r.multiply_adds;
        pt.peak_scalars = r.peak_intermediate_scalars;
        return pt;
    }

    const std::size_t d = ls.in.size() + ls.out.size();
    std::vector<Index> ranks(d, ls.rank);
    if (s.model == SweepModel::tt) ranks[0] = 1;
    Shape dims = ls.in;
    dims.insert(dims.end(), ls.out.begin(), ls.out.end());
    std::vector<Tensor> cores;
    for (std::size_t k = 0; k < d; ++k) cores.emplace_back(Shape{ranks[k], dims[k], ranks[(k + 1) % d]});
    const TRL layer(ls.in, ls.out, TR(std::move(cores)));
    const Tensor x({s.batch, I});

    if (s.pass == Pass::forward) {
        const auto [y, r] = trl_forward_instrumented(layer, x);
        pt.multiply_adds = r.multiply_adds;
        pt.peak_scalars = r.peak_intermediate_scalars;
    } else {
        TRLBackwardReport r;
        trl_backward(layer, x, Tensor({s.batch, O}), true, &r);
        pt.per_core = r.per_core;
        pt.total = r.total();
        const FlopReport& counted =
            s.scope == BackwardScope::total ? pt.total : r.per_core[kRepresentativeCore];
        pt.multiply_adds = counted.multiply_adds;
        pt.peak_scalars = counted.peak_intermediate_scalars;
    }
    return pt;
}

}  // namespace

void SweepSpec::validate() const {
    if (values.size() < 4) throw std::invalid_argument("sweep: need at least 4 points for slope fitting");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] <= values[i - 1]) throw std::invalid_argument("sweep: values must be strictly increasing");
    if (values.front() < 1) throw std::invalid_argument("sweep: values must be positive");
    if (n < 1 || m < 1 || rank < 1 || input_mode < 1 || output_mode < 1 || batch < 1)
        throw std::invalid_argument("sweep: fixed shape parameters must be positive");
    if (model == SweepModel::dense && (variable == SweepVariable::rank || variable == SweepVariable::cores))
        throw std::invalid_argument(std::string("sweep: dense layers have no ") + to_string(variable));
    if (pass == Pass::backward && model != SweepModel::dense && scope == BackwardScope::representative) {
        const bool ok = variable == SweepVariable::cores ? values.front() >= 7 : n >= 4;
        if (!ok) throw std::invalid_argument("sweep: the representative backward core needs at least 4 input cores");
    }
    for (Index v : values) {
        if (variable == SweepVariable::input && v % mode_product(n - 1, input_mode) != 0)
            throw std::invalid_argument("sweep: I = " + std::to_string(v) + " is not a multiple of " +
                                        std::to_string(mode_product(n - 1, input_mode)));
        if (variable == SweepVariable::output && v % mode_product(m - 1, output_mode) != 0)
            throw std::invalid_argument("sweep: O = " + std::to_string(v) + " is not a multiple of " +
                                        std::to_string(mode_product(m - 1, output_mode)));
        if (variable == SweepVariable::cores && v < 2)
            throw std::invalid_argument("sweep: d must be at least 2");
    }
}

SweepSpec SweepSpec::forward_rank() { return SweepSpec{}; }

SweepSpec SweepSpec::backward_rank() {
    SweepSpec s;
    s.pass = Pass::backward;
    s.values = {2, 3, 4, 6};
    s.n = s.m = 4;
    s.input_mode = s.output_mode = 2;
    return s;
}

SweepSpec SweepSpec::forward_input(SweepModel model) {
    SweepSpec s;
    s.variable = SweepVariable::input;
    s.model = model;
    s.values = {64, 128, 256, 512};
    return s;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 paired points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

SweepReport run_sweep(const SweepSpec& spec) {
    spec.validate();
    SweepReport rep;
    rep.spec = spec;
    std::vector<double> x, f, p;
    for (Index v : spec.values) {
        rep.points.push_back(measure(spec, v));
        x.push_back(static_cast<double>(v));
        f.push_back(static_cast<double>(rep.points.back().multiply_adds));
        p.push_back(static_cast<double>(rep.points.back().peak_scalars));
    }
    rep.flop_slope = loglog_slope(x, f);
    rep.peak_slope = loglog_slope(x, p);
    return rep;
}

std::string sweep_csv(const SweepReport& report) {
    std::ostringstream os;
    os << "variable,value,multiply_adds,peak_scalars\n";
    const char* var = to_string(report.spec.variable);
    for (const auto& pt : report.points)
        os << var << ',' << pt.value << ',' << pt.multiply_adds << ',' << pt.peak_scalars << '\n';
    os << std::setprecision(6) << "slope," << var << ',' << report.flop_slope << ',' << report.peak_slope << '\n';
    return os.str();
}

}  // namespace trnn
