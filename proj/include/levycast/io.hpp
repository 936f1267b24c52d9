#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "levycast/data.hpp"
#include "levycast/network.hpp"

namespace levycast {

using json = nlohmann::json;

// 64-bit FNV-1a of a string, as 16 hex digits. Artifacts embed the hash of
// the producing run configuration; consumers refuse mismatches.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline json scaler_to_json(const Scaler& s) {
    return json{{"center", s.center}, {"spread", s.spread}};
}

inline Scaler scaler_from_json(const json& j) {
    return Scaler{j.at("center").get<double>(), j.at("spread").get<double>()};
}

inline json model_config_to_json(const ModelConfig& c) {
    return json{{"hidden_dim", c.hidden_dim},
                {"encoder_layers", c.encoder_layers},
                {"decoder_layers", c.decoder_layers},
                {"K", c.K},
                {"T", c.T},
                {"H", c.H},
                {"alpha_min", c.alpha_min},
                {"alpha_max", c.alpha_max},
                {"eps_beta_max", c.eps_beta_max},
                {"eps_gamma", c.eps_gamma},
                {"lambda_ent", c.lambda_ent},
                {"grid_m", c.grid_m},
                {"tau_max", c.tau_max},
                {"head_kind", head_kind_name(c.head_kind)}};
}

inline ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.encoder_layers = j.at("encoder_layers").get<int>();
    c.decoder_layers = j.at("decoder_layers").get<int>();
    c.K = j.at("K").get<int>();
    c.T = j.at("T").get<int>();
    c.H = j.at("H").get<int>();
    c.alpha_min = j.at("alpha_min").get<double>();
    c.alpha_max = j.at("alpha_max").get<double>();
    c.eps_beta_max = j.at("eps_beta_max").get<double>();
    c.eps_gamma = j.at("eps_gamma").get<double>();
    c.lambda_ent = j.at("lambda_ent").get<double>();
    c.grid_m = j.at("grid_m").get<int>();
    c.tau_max = j.at("tau_max").get<double>();
    c.head_kind = head_kind_from(j.at("head_kind").get<std::string>());
    c.validate();
    return c;
}

// Parameters serialize as an ordered array: order is part of the format
// (it fixes optimizer slots and graph injection order).
inline json params_to_json(const ParamStore& ps) {
    json arr = json::array();
    for (std::size_t i = 0; i < ps.names.size(); ++i) {
        const auto& t = ps.tensors[i];
        arr.push_back(json{{"name", ps.names[i]}, {"rows", t.rows}, {"cols", t.cols}, {"data", t.v}});
    }
    return arr;
}

inline ParamStore params_from_json(const json& arr) {
    ParamStore ps;
    for (const auto& e : arr) {
        ad::Tensor t(e.at("rows").get<int>(), e.at("cols").get<int>(),
                     e.at("data").get<std::vector<double>>());
        ps.add(e.at("name").get<std::string>(), std::move(t));
    }
    return ps;
}

namespace detail {
inline json read_json_file(const std::string& path, const std::string& expected_format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": not valid JSON: " + e.what());
    }
    if (j.value("format", "") != expected_format)
        throw std::runtime_error(path + ": expected format '" + expected_format + "'");
    return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    const auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}
}  // namespace detail

// ---- dataset container ----

inline void save_dataset(const std::string& path, const WindowedDataset& ds,
                         const std::string& config_hash) {
    json j;
    j["format"] = "levycast-dataset-v1";
    j["config_hash"] = config_hash;
    j["T"] = ds.T;
    j["H"] = ds.H;
    j["scaler"] = scaler_to_json(ds.scaler);
    j["source"] = ds.source;
    json wins = json::array();
    for (std::size_t i = 0; i < ds.windows.size(); ++i) {
        json w{{"context", ds.windows[i].context},
               {"targets", ds.windows[i].targets},
               {"split", split_name(ds.splits[i])},
               {"start", ds.starts.size() > i ? ds.starts[i] : 0}};
        if (ds.regimes.size() > i && ds.regimes[i] >= 0) w["regime"] = ds.regimes[i];
        wins.push_back(std::move(w));
    }
    j["windows"] = std::move(wins);
    detail::write_text_file(path, j.dump());
}

inline std::pair<WindowedDataset, std::string> load_dataset(const std::string& path) {
    const json j = detail::read_json_file(path, "levycast-dataset-v1");
    WindowedDataset ds;
    ds.T = j.at("T").get<int>();
    ds.H = j.at("H").get<int>();
    ds.scaler = scaler_from_json(j.at("scaler"));
    ds.source = j.value("source", "");
    for (const auto& w : j.at("windows")) {
        Window win;
        win.context = w.at("context").get<std::vector<double>>();
        win.targets = w.at("targets").get<std::vector<double>>();
        if (static_cast<int>(win.context.size()) != ds.T ||
            static_cast<int>(win.targets.size()) != ds.H)
            throw std::runtime_error(path + ": window shape does not match T/H");
        ds.windows.push_back(std::move(win));
        const std::string s = w.at("split").get<std::string>();
        if (s == "train") ds.splits.push_back(Split::train);
        else if (s == "val") ds.splits.push_back(Split::val);
        else if (s == "test") ds.splits.push_back(Split::test);
        else throw std::runtime_error(path + ": unknown split label '" + s + "'");
        ds.starts.push_back(w.value("start", static_cast<std::size_t>(0)));
        ds.regimes.push_back(w.value("regime", -1));
    }
    return {std::move(ds), j.at("config_hash").get<std::string>()};
}

// ---- weight checkpoint ----

struct Checkpoint {
    ParamStore params;
    ModelConfig config;
    Scaler scaler;
    std::string config_hash;
    std::uint64_t seed = 0;
    double val_loss = 0.0;
};

inline void save_checkpoint(const std::string& path, const ParamStore& ps, const ModelConfig& cfg,
                            const Scaler& scaler, const std::string& config_hash,
                            std::uint64_t seed, double val_loss,
                            const json& provenance = json::object()) {
    json j;
    j["format"] = "levycast-checkpoint-v1";
    j["config_hash"] = config_hash;
    j["model"] = model_config_to_json(cfg);
    j["scaler"] = scaler_to_json(scaler);
    j["seed"] = seed;
    j["val_loss"] = val_loss;
    j["provenance"] = provenance;  // training knobs, for the record only
    j["params"] = params_to_json(ps);
    detail::write_text_file(path, j.dump(1));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    const json j = detail::read_json_file(path, "levycast-checkpoint-v1");
    Checkpoint ck;
    ck.config_hash = j.at("config_hash").get<std::string>();
    ck.config = model_config_from_json(j.at("model"));
    ck.scaler = scaler_from_json(j.at("scaler"));
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.val_loss = j.at("val_loss").get<double>();
    ck.params = params_from_json(j.at("params"));
    return ck;
}

}  // namespace levycast
