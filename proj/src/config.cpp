// SPDX-License-Identifier: Apache-2.0
#include "trnn/config.hpp"

#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "trnn/atomic_file.hpp"

namespace trnn {

LayerPlan LayerPlan::ucf11() {
    std::vector<Index> ranks(13, 5);
    ranks[0] = 10;
    return {{4, 2, 5, 8, 6, 5, 3, 2}, {4, 4, 2, 4, 2}, ranks};
}

void LayerPlan::validate() const {
    if (input_dims.empty() || output_dims.empty()) throw ConfigError("layer plan: empty input or output dims");
    if (ranks.size() != input_dims.size() + output_dims.size())
        throw ConfigError("layer plan: expected " + std::to_string(input_dims.size() + output_dims.size()) +
                          " ranks, got " + std::to_string(ranks.size()));
    for (Index v : input_dims)
        if (v < 1) throw ConfigError("layer plan: dims must be positive");
    for (Index v : output_dims)
        if (v < 1) throw ConfigError("layer plan: dims must be positive");
    for (Index v : ranks)
        if (v < 1) throw ConfigError("layer plan: ranks must be positive");
}

Index LayerPlan::dense_params() const { return volume(input_dims) * volume(output_dims); }

Index LayerPlan::ring_params() const {
    Shape dims = input_dims;
    dims.insert(dims.end(), output_dims.begin(), output_dims.end());
    Index n = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) n += ranks[k] * dims[k] * ranks[(k + 1) % dims.size()];
    return n;
}

namespace {

using nlohmann::json;

class Section {
public:
    Section(const json& root, std::string name) : name_(std::move(name)) {
        if (!root.contains(name_)) return;
        node_ = &root.at(name_);
        if (!node_->is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        known_.insert(key);
        if (!node_ || !node_->contains(key)) return;
        try {
            out = node_->at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config: '" + name_ + "." + key + "' has the wrong type");
        }
    }

    template <typename E>
    void get_enum(const std::string& key, E& out, const std::function<E(const std::string&)>& parse) {
        std::string s;
        known_.insert(key);
        if (!node_ || !node_->contains(key)) return;
        get(key, s);
        try {
            out = parse(s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("config: '" + name_ + "." + key + "': " + e.what());
        }
    }

    void finish() const {
        if (!node_) return;
        for (const auto& [k, v] : node_->items())
            if (!known_.count(k)) throw ConfigError("config: unknown key '" + name_ + "." + k + "'");
    }

private:
    std::string name_;
    const json* node_{nullptr};
    std::set<std::string> known_;
};

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam or sgd)");
}

WeightRegime regime_from_string(const std::string& s) {
    if (s == "ring") return WeightRegime::ring;
    if (s == "matrix") return WeightRegime::matrix;
    throw std::invalid_argument("unknown regime '" + s + "' (expected ring or matrix)");
}

BackwardScope scope_from_string(const std::string& s) {
    if (s == "representative") return BackwardScope::representative;
    if (s == "total") return BackwardScope::total;
    throw std::invalid_argument("unknown scope '" + s + "' (expected representative or total)");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    static const std::set<std::string> sections{"synth", "fit", "sweep", "toytrain", "gradcheck", "compress"};
    for (const auto& [k, v] : root.items())
        if (!sections.count(k)) throw ConfigError("config: unknown key '" + k + "'");

    ExperimentConfig cfg;

    Section synth(root, "synth");
    auto& sc = cfg.synth;
    synth.get("dim", sc.dim);
    synth.get("n_samples", sc.n_samples);
    synth.get("input_variance", sc.input_variance);
    synth.get("noise_sigmas", sc.noise_sigmas);
    synth.get("gen_rank", sc.gen_rank);
    synth.get_enum<WeightRegime>("regime", sc.regime, regime_from_string);
    synth.get("input_dims", sc.input_dims);
    synth.get("output_dims", sc.output_dims);
    synth.get("tr_ranks", sc.tr_ranks);
    synth.get("tt_ranks", sc.tt_ranks);
    synth.get("seeds", sc.seeds);
    std::vector<std::string> models;
    synth.get("models", models);
    if (!models.empty()) {
        sc.models.clear();
        for (const auto& m : models) {
            try {
                sc.models.push_back(model_kind_from_string(m));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config: 'synth.models': ") + e.what());
            }
        }
    }
    synth.get("init_variance", sc.init_variance);
    synth.get("record_wall_time", sc.record_wall_time);
    synth.finish();

    Section fit(root, "fit");
    fit.get("learning_rate", sc.fit.learning_rate);
    fit.get("epochs", sc.fit.epochs);
    fit.get("batch_size", sc.fit.batch_size);
    fit.get_enum<OptimizerKind>("optimizer", sc.fit.optimizer, optimizer_from_string);
    fit.get("beta1", sc.fit.beta1);
    fit.get("beta2", sc.fit.beta2);
    fit.get("epsilon", sc.fit.epsilon);
    fit.finish();

    Section sweep(root, "sweep");
    auto& sw = cfg.sweep;
    sweep.get_enum<SweepVariable>("variable", sw.variable, sweep_variable_from_string);
    sweep.get("values", sw.values);
    sweep.get_enum<SweepModel>("model", sw.model, sweep_model_from_string);
    sweep.get_enum<Pass>("pass", sw.pass, pass_from_string);
    sweep.get("rank", sw.rank);
    sweep.get("input_mode", sw.input_mode);
    sweep.get("output_mode", sw.output_mode);
    sweep.get("n", sw.n);
    sweep.get("m", sw.m);
    sweep.get("batch", sw.batch);
    sweep.get_enum<BackwardScope>("scope", sw.scope, scope_from_string);
    sweep.finish();

    Section toy(root, "toytrain");
    auto& tc = cfg.toy;
    toy.get("classes", tc.classes);
    toy.get("steps", tc.steps);
    toy.get("input_dims", tc.input_dims);
    toy.get("hidden_dims", tc.hidden_dims);
    toy.get("ranks", tc.ranks);
    toy.get("train_samples", tc.train_samples);
    toy.get("test_samples", tc.test_samples);
    toy.get("noise", tc.noise);
    toy.get("epochs", tc.epochs);
    toy.get("batch", tc.batch);
    toy.get("learning_rate", tc.learning_rate);
    toy.get("forget_bias", tc.forget_bias);
    toy.get("seed", tc.seed);
    toy.finish();

    Section gc(root, "gradcheck");
    gc.get("eps", cfg.gradcheck.eps);
    gc.get("tol", cfg.gradcheck.tol);
    gc.get("lstm_tol", cfg.gradcheck.lstm_tol);
    gc.get("layers", cfg.gradcheck.layers);
    gc.get("seed", cfg.gradcheck.seed);
    gc.finish();

    Section cp(root, "compress");
    cp.get("input_dims", cfg.compress.input_dims);
    cp.get("output_dims", cfg.compress.output_dims);
    cp.get("ranks", cfg.compress.ranks);
    cp.finish();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::runtime_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(text);
}

std::string config_schema() {
    const ExperimentConfig d;
    auto list = [](const auto& v) {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
        os << ']';
        return os.str();
    };
    std::ostringstream os;
    os << "Config file (JSON). Every key is optional; unknown keys are rejected.\n"
       << "  synth.dim              " << d.synth.dim << "\n"
       << "  synth.n_samples        " << d.synth.n_samples << "\n"
       << "  synth.input_variance   " << d.synth.input_variance << "\n"
       << "  synth.noise_sigmas     " << list(d.synth.noise_sigmas) << "\n"
       << "  synth.gen_rank         " << d.synth.gen_rank << "\n"
       << "  synth.regime           \"ring\" (or \"matrix\")\n"
       << "  synth.input_dims       " << list(d.synth.input_dims) << "\n"
       << "  synth.output_dims      " << list(d.synth.output_dims) << "\n"
       << "  synth.tr_ranks         gen_rank on every core\n"
       << "  synth.tt_ranks         " << list(d.synth.default_tt_ranks()) << "\n"
       << "  synth.seeds            " << list(d.synth.seeds) << "\n"
       << "  synth.models           [\"linear\", \"tt\", \"tr\"]\n"
       << "  synth.init_variance    " << d.synth.init_variance << "\n"
       << "  synth.record_wall_time " << std::boolalpha << d.synth.record_wall_time << "\n"
       << "  fit.learning_rate      " << d.synth.fit.learning_rate << "\n"
       << "  fit.epochs             " << d.synth.fit.epochs << "\n"
       << "  fit.batch_size         " << d.synth.fit.batch_size << " (0 = full batch)\n"
       << "  fit.optimizer          \"adam\" (or \"sgd\")\n"
       << "  fit.beta1/beta2        " << d.synth.fit.beta1 << " / " << d.synth.fit.beta2 << "\n"
       << "  fit.epsilon            " << d.synth.fit.epsilon << "\n"
       << "  sweep.variable         \"R\" (or \"I\", \"O\", \"d\")\n"
       << "  sweep.values           " << list(d.sweep.values) << "\n"
       << "  sweep.model            \"tr\" (or \"dense\", \"tt\")\n"
       << "  sweep.pass             \"forward\" (or \"backward\")\n"
       << "  sweep.rank             " << d.sweep.rank << "\n"
       << "  sweep.input_mode       " << d.sweep.input_mode << "\n"
       << "  sweep.output_mode      " << d.sweep.output_mode << "\n"
       << "  sweep.n / sweep.m      " << d.sweep.n << " / " << d.sweep.m << "\n"
       << "  sweep.batch            " << d.sweep.batch << "\n"
       << "  sweep.scope            \"representative\" (or \"total\")\n"
       << "  toytrain.classes       " << d.toy.classes << "\n"
       << "  toytrain.steps         " << d.toy.steps << "\n"
       << "  toytrain.input_dims    " << list(d.toy.input_dims) << "\n"
       << "  toytrain.hidden_dims   " << list(d.toy.hidden_dims) << "\n"
       << "  toytrain.ranks         " << list(d.toy.ring_ranks()) << "\n"
       << "  toytrain.train_samples " << d.toy.train_samples << "\n"
       << "  toytrain.test_samples  " << d.toy.test_samples << "\n"
       << "  toytrain.noise         " << d.toy.noise << "\n"
       << "  toytrain.epochs        " << d.toy.epochs << "\n"
       << "  toytrain.batch         " << d.toy.batch << "\n"
       << "  toytrain.learning_rate " << d.toy.learning_rate << "\n"
       << "  toytrain.forget_bias   " << d.toy.forget_bias << "\n"
       << "  toytrain.seed          " << d.toy.seed << "\n"
       << "  gradcheck.eps          " << d.gradcheck.eps << "\n"
       << "  gradcheck.tol          " << d.gradcheck.tol << "\n"
       << "  gradcheck.lstm_tol     " << d.gradcheck.lstm_tol << "\n"
       << "  gradcheck.layers       " << d.gradcheck.layers << "\n"
       << "  gradcheck.seed         " << d.gradcheck.seed << "\n"
       << "  compress.input_dims    " << list(d.compress.input_dims) << "\n"
       << "  compress.output_dims   " << list(d.compress.output_dims) << "\n"
       << "  compress.ranks         " << list(d.compress.ranks) << "\n";
    return os.str();
}

}  // namespace trnn
