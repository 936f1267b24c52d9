#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "levycast/data.hpp"
#include "levycast/io.hpp"
#include "levycast/network.hpp"

namespace levycast {

// Full experiment description. One RunConfig drives generate, train,
// evaluate, and sample; its hash is stamped into every artifact so that
// mismatched dataset/checkpoint/config combinations are refused.
struct RunConfig {
    ModelConfig model;

    // dataset: either a synthetic regime schedule or a CSV source
    std::string dataset_kind = "synthetic";  // "synthetic" | "csv"
    std::vector<RegimeSegment> schedule = {{StableParams{1.8, 0.0, 1.0, 0.0}, 6000},
                                           {StableParams{1.2, 0.0, 1.0, 0.0}, 6000}};
    std::uint64_t data_seed = 7;
    std::string csv_path;
    std::string csv_column;
    bool csv_log_returns = false;
    int stride = 1;
    SplitFractions splits;

    // training
    int epochs = 100;
    int batch_size = 256;
    double eta = 5e-4;
    bool uniform_weights = false;
    bool allow_small_batch = false;

    // run plumbing
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string out_dir = "runs";
    std::string dataset_path;  // defaults to <out_dir>/dataset.json
    int n_trajectories = 100;

    // diagnostics and metrics
    std::size_t diag_window = 500;
    HillThresholds hill;
    bool regime_breakdown = false;
    std::vector<double> coverage_levels = {0.75, 0.90, 0.995};
    std::vector<double> ql_levels = {0.1, 0.5, 0.9, 0.99};

    std::string dataset_file() const {
        return dataset_path.empty() ? out_dir + "/dataset.json" : dataset_path;
    }
    // Head name in the file keeps checkpoints of different heads trained on
    // one dataset from colliding, which is what makes comparison tables
    // possible from a single output directory.
    std::string checkpoint_file(std::uint64_t seed) const {
        return out_dir + "/checkpoint_" + head_kind_name(model.head_kind) + "_seed" +
               std::to_string(seed) + ".json";
    }

    void validate() const {
        model.validate();
        if (dataset_kind != "synthetic" && dataset_kind != "csv")
            throw std::invalid_argument("dataset_kind must be 'synthetic' or 'csv'");
        if (dataset_kind == "synthetic") {
            if (schedule.empty()) throw std::invalid_argument("empty synthetic schedule");
            for (const auto& seg : schedule)
                if (!seg.params.valid() || seg.length == 0)
                    throw std::invalid_argument("invalid synthetic schedule segment");
        } else if (csv_path.empty() || csv_column.empty()) {
            throw std::invalid_argument("csv dataset needs csv_path and csv_column");
        }
        if (seeds.empty()) throw std::invalid_argument("need at least one seed");
        if (epochs < 1 || batch_size < 1 || stride < 1 || n_trajectories < 1)
            throw std::invalid_argument("epochs, batch_size, stride, n_trajectories must be positive");
        if (!(eta > 0.0)) throw std::invalid_argument("learning rate must be positive");
    }
};

inline json run_config_to_json(const RunConfig& c) {
    json sched = json::array();
    for (const auto& seg : c.schedule)
        sched.push_back(json{{"alpha", seg.params.alpha},
                             {"beta", seg.params.beta},
                             {"gamma", seg.params.gamma},
                             {"delta", seg.params.delta},
                             {"length", seg.length}});
    return json{{"model", model_config_to_json(c.model)},
                {"dataset_kind", c.dataset_kind},
                {"schedule", std::move(sched)},
                {"data_seed", c.data_seed},
                {"csv_path", c.csv_path},
                {"csv_column", c.csv_column},
                {"csv_log_returns", c.csv_log_returns},
                {"stride", c.stride},
                {"split_train", c.splits.train},
                {"split_val", c.splits.val},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"eta", c.eta},
                {"uniform_weights", c.uniform_weights},
                {"allow_small_batch", c.allow_small_batch},
                {"seeds", c.seeds},
                {"out_dir", c.out_dir},
                {"dataset_path", c.dataset_path},
                {"n_trajectories", c.n_trajectories},
                {"diag_window", c.diag_window},
                {"hill_low_floor", c.hill.low_floor},
                {"hill_high_ceil", c.hill.high_ceil},
                {"regime_breakdown", c.regime_breakdown},
                {"coverage_levels", c.coverage_levels},
                {"ql_levels", c.ql_levels}};
}

// Every field is optional in the file; absent fields keep their defaults,
// so a config file can be as small as {}.
inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("model")) {
        json m = model_config_to_json(c.model);
        m.update(j.at("model"));  // partial model blocks allowed
        c.model = model_config_from_json(m);
    }
    c.dataset_kind = j.value("dataset_kind", c.dataset_kind);
    if (j.contains("schedule")) {
        c.schedule.clear();
        for (const auto& seg : j.at("schedule"))
            c.schedule.push_back(RegimeSegment{
                StableParams{seg.at("alpha").get<double>(), seg.value("beta", 0.0),
                             seg.value("gamma", 1.0), seg.value("delta", 0.0)},
                seg.at("length").get<std::size_t>()});
    }
    c.data_seed = j.value("data_seed", c.data_seed);
    c.csv_path = j.value("csv_path", c.csv_path);
    c.csv_column = j.value("csv_column", c.csv_column);
    c.csv_log_returns = j.value("csv_log_returns", c.csv_log_returns);
    c.stride = j.value("stride", c.stride);
    c.splits.train = j.value("split_train", c.splits.train);
    c.splits.val = j.value("split_val", c.splits.val);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.eta = j.value("eta", c.eta);
    c.uniform_weights = j.value("uniform_weights", c.uniform_weights);
    c.allow_small_batch = j.value("allow_small_batch", c.allow_small_batch);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.out_dir = j.value("out_dir", c.out_dir);
    c.dataset_path = j.value("dataset_path", c.dataset_path);
    c.n_trajectories = j.value("n_trajectories", c.n_trajectories);
    c.diag_window = j.value("diag_window", c.diag_window);
    c.hill.low_floor = j.value("hill_low_floor", c.hill.low_floor);
    c.hill.high_ceil = j.value("hill_high_ceil", c.hill.high_ceil);
    c.regime_breakdown = j.value("regime_breakdown", c.regime_breakdown);
    if (j.contains("coverage_levels"))
        c.coverage_levels = j.at("coverage_levels").get<std::vector<double>>();
    if (j.contains("ql_levels")) c.ql_levels = j.at("ql_levels").get<std::vector<double>>();
    return c;
}

// Compatibility hash: exactly the fields that determine the dataset's
// contents and window shape. Checkpoints trained on a dataset carry its
// hash, so evaluation can refuse recipe mismatches while still allowing
// different heads or training variants to be compared on one dataset.
inline std::string run_config_hash(const RunConfig& c) {
    json sched = json::array();
    for (const auto& seg : c.schedule)
        sched.push_back(json{{"alpha", seg.params.alpha},
                             {"beta", seg.params.beta},
                             {"gamma", seg.params.gamma},
                             {"delta", seg.params.delta},
                             {"length", seg.length}});
    const json j{{"dataset_kind", c.dataset_kind},
                 {"schedule", std::move(sched)},
                 {"data_seed", c.data_seed},
                 {"csv_path", c.csv_path},
                 {"csv_column", c.csv_column},
                 {"csv_log_returns", c.csv_log_returns},
                 {"stride", c.stride},
                 {"split_train", c.splits.train},
                 {"split_val", c.splits.val},
                 {"T", c.model.T},
                 {"H", c.model.H}};
    return fnv1a_hex(j.dump());
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace levycast
