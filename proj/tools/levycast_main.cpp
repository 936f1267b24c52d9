// Command-line front end: generate | diagnose | train | evaluate | sample.
// Exit codes: 0 success, 2 usage or input error, 3 numerical abort during
// training, 4 artifact/config-hash mismatch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levycast/levycast.hpp"

namespace fs = std::filesystem;
using namespace levycast;

namespace {

struct ArtifactMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_effective_config(const RunConfig& cfg) {
    json j = run_config_to_json(cfg);
    j["config_hash"] = run_config_hash(cfg);
    detail::write_text_file(cfg.out_dir + "/config.json", j.dump(1));
}

std::vector<double> load_series(const RunConfig& cfg) {
    if (cfg.dataset_kind == "csv")
        return ingest_csv(cfg.csv_path, cfg.csv_column, cfg.csv_log_returns);
    return generate_synthetic(cfg.schedule, cfg.data_seed);
}

// Schedule segment index containing the window's first target observation.
int regime_of_window(const std::vector<RegimeSegment>& schedule, std::size_t start, int T) {
    std::size_t pos = start + static_cast<std::size_t>(T);
    std::size_t acc = 0;
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        acc += schedule[s].length;
        if (pos < acc) return static_cast<int>(s);
    }
    return static_cast<int>(schedule.size()) - 1;
}

int cmd_generate(const RunConfig& cfg) {
    const auto series = load_series(cfg);
    auto ds = make_windows(series, cfg.model.T, cfg.model.H, cfg.stride, cfg.splits);
    ds.source = cfg.dataset_kind == "csv"
                    ? cfg.csv_path + ":" + cfg.csv_column
                    : "synthetic(seed=" + std::to_string(cfg.data_seed) + ")";
    if (cfg.dataset_kind == "synthetic") {
        for (std::size_t i = 0; i < ds.windows.size(); ++i)
            ds.regimes[i] = regime_of_window(cfg.schedule, ds.starts[i], ds.T);
    } else if (cfg.regime_breakdown) {
        const auto buckets = bucket_by_hill(series, cfg.diag_window, cfg.hill);
        for (std::size_t i = 0; i < ds.windows.size(); ++i) {
            const std::size_t seg = ds.starts[i] / cfg.diag_window;
            if (seg < buckets.size()) ds.regimes[i] = static_cast<int>(buckets[seg]);
        }
    }
    const std::string hash = run_config_hash(cfg);
    save_dataset(cfg.dataset_file(), ds, hash);

    // Diagnostics sidecar: one entry per schedule segment (synthetic) or per
    // rolling window (csv), skipping segments too short to diagnose.
    json diag = json::array();
    if (cfg.dataset_kind == "synthetic") {
        std::size_t begin = 0;
        for (const auto& seg : cfg.schedule) {
            const std::size_t end = begin + seg.length;
            if (seg.length >= 50) {
                const auto d = tail_diagnostics(series, begin, end);
                diag.push_back(json{{"begin", d.begin},
                                    {"end", d.end},
                                    {"alpha_true", seg.params.alpha},
                                    {"hill_alpha", d.hill_alpha},
                                    {"kurtosis", d.kurtosis},
                                    {"ks_gaussian_p", d.ks_gaussian_p}});
            }
            begin = end;
        }
    } else {
        for (const auto& d : rolling_tail_diagnostics(series, cfg.diag_window))
            diag.push_back(json{{"begin", d.begin},
                                {"end", d.end},
                                {"hill_alpha", d.hill_alpha},
                                {"kurtosis", d.kurtosis},
                                {"ks_gaussian_p", d.ks_gaussian_p}});
    }
    detail::write_text_file(cfg.out_dir + "/dataset_diagnostics.json",
                            json{{"config_hash", hash}, {"segments", diag}}.dump(1));
    write_effective_config(cfg);
    std::cout << "wrote " << cfg.dataset_file() << ": " << ds.windows.size() << " windows (T="
              << ds.T << ", H=" << ds.H << "), hash " << hash << "\n";
    return 0;
}

int cmd_diagnose(const RunConfig& cfg) {
    const auto series = load_series(cfg);
    const auto rolling = rolling_tail_diagnostics(series, cfg.diag_window);
    const auto buckets = bucket_by_hill(series, cfg.diag_window, cfg.hill);
    const char* names[] = {"low", "medium", "high"};
    std::cout << "segment            hill    kurtosis  ks_p      regime\n";
    json out = json::array();
    for (std::size_t i = 0; i < rolling.size(); ++i) {
        const auto& d = rolling[i];
        char buf[128];
        std::snprintf(buf, sizeof buf, "[%8zu,%8zu) %-7.3f %-9.3f %-9.3g %s\n", d.begin, d.end,
                      d.hill_alpha, d.kurtosis, d.ks_gaussian_p,
                      names[static_cast<int>(buckets[i])]);
        std::cout << buf;
        out.push_back(json{{"begin", d.begin},
                           {"end", d.end},
                           {"hill_alpha", d.hill_alpha},
                           {"kurtosis", d.kurtosis},
                           {"ks_gaussian_p", d.ks_gaussian_p},
                           {"regime", names[static_cast<int>(buckets[i])]}});
    }
    detail::write_text_file(cfg.out_dir + "/diagnostics.json",
                            json{{"config_hash", run_config_hash(cfg)}, {"segments", out}}.dump(1));
    write_effective_config(cfg);
    return 0;
}

std::pair<WindowedDataset, std::string> load_dataset_checked(const RunConfig& cfg) {
    auto [ds, hash] = load_dataset(cfg.dataset_file());
    if (hash != run_config_hash(cfg))
        throw ArtifactMismatch(cfg.dataset_file() + " was produced by config hash " + hash +
                               ", current config hashes to " + run_config_hash(cfg));
    return {std::move(ds), hash};
}

int cmd_train(const RunConfig& cfg) {
    auto [ds, hash] = load_dataset_checked(cfg);
    write_effective_config(cfg);
    for (std::uint64_t seed : cfg.seeds) {
        TrainOptions opt;
        opt.epochs = cfg.epochs;
        opt.batch_size = cfg.batch_size;
        opt.eta = cfg.eta;
        opt.uniform_weights = cfg.uniform_weights;
        opt.allow_small_batch = cfg.allow_small_batch;
        opt.seed = seed;
        opt.nan_dump_path = cfg.out_dir + "/nan_dump_seed" + std::to_string(seed) + ".json";
        const auto result = train(ds, cfg.model, opt);

        std::string log = "epoch,train_loss,val_loss,entropy,grad_norm,lr\n";
        for (const auto& r : result.log) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.epoch,
                          r.train_loss, r.val_loss, r.entropy, r.grad_norm, r.lr);
            log += buf;
        }
        detail::write_text_file(cfg.out_dir + "/train_log_" + head_kind_name(cfg.model.head_kind) +
                                    "_seed" + std::to_string(seed) + ".csv",
                                log);
        const json provenance{{"epochs", cfg.epochs},
                              {"batch_size", cfg.batch_size},
                              {"eta", cfg.eta},
                              {"uniform_weights", cfg.uniform_weights}};
        save_checkpoint(cfg.checkpoint_file(seed), result.params, cfg.model, ds.scaler, hash, seed,
                        result.best_val_loss, provenance);
        std::cout << "seed " << seed << ": best val loss " << result.best_val_loss << " at epoch "
                  << result.best_epoch << " -> " << cfg.checkpoint_file(seed) << "\n";
    }
    return 0;
}

struct SeedEval {
    std::uint64_t seed = 0;
    MetricReport report;
    std::map<int, MetricReport> by_regime;
};

// Deterministic per-(seed, window) forecast seed; windows must not share
// RNG streams or their sampling noise would be correlated across cases.
std::uint64_t forecast_seed(std::uint64_t seed, std::size_t window) {
    return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(window) + 1));
}

int cmd_evaluate(const RunConfig& cfg) {
    auto [ds, hash] = load_dataset_checked(cfg);
    const auto test_idx = ds.indices_of(Split::test);
    if (test_idx.empty()) throw std::invalid_argument("dataset has no test windows");
    write_effective_config(cfg);

    // Every head with a full seed set of checkpoints in the output directory
    // joins the comparison table; the configured head must be present.
    std::vector<HeadKind> heads;
    for (const auto& name :
         {"levy_mixture", "gaussian", "student_t", "asym_student_t", "gaussian_mixture",
          "student_t_mixture"}) {
        RunConfig probe = cfg;
        probe.model.head_kind = head_kind_from(name);
        const bool all = std::all_of(cfg.seeds.begin(), cfg.seeds.end(), [&](std::uint64_t s) {
            return fs::exists(probe.checkpoint_file(s));
        });
        if (all) heads.push_back(probe.model.head_kind);
    }
    if (std::find(heads.begin(), heads.end(), cfg.model.head_kind) == heads.end())
        throw std::invalid_argument("no checkpoints for head '" +
                                    head_kind_name(cfg.model.head_kind) + "' under " +
                                    cfg.out_dir + " (run train first)");

    std::string table;
    std::string csv;
    for (HeadKind head : heads) {
        RunConfig hc = cfg;
        hc.model.head_kind = head;
        std::vector<SeedEval> evals;
        for (std::uint64_t seed : cfg.seeds) {
            const auto ck = load_checkpoint(hc.checkpoint_file(seed));
            if (ck.config_hash != hash)
                throw ArtifactMismatch(hc.checkpoint_file(seed) + " carries config hash " +
                                       ck.config_hash + ", dataset has " + hash);

            // Consistency check: the stored validation loss must reproduce.
            const double val = validation_loss(ds, ck.config, ck.params, Split::val,
                                               cfg.uniform_weights,
                                               static_cast<std::size_t>(cfg.batch_size));
            if (std::fabs(val - ck.val_loss) > 1e-9 * std::max(1.0, std::fabs(ck.val_loss)))
                std::cerr << "warning: recomputed val loss " << val << " differs from stored "
                          << ck.val_loss << " for seed " << seed << "\n";

            std::vector<EvalCase> cases;
            std::map<int, std::vector<EvalCase>> regime_cases;
            for (std::size_t wi : test_idx) {
                const Window& w = ds.windows[wi];
                const auto fc = forecast(w.context, ck.params, ck.config, ck.scaler,
                                         cfg.n_trajectories, forecast_seed(seed, wi));
                EvalCase ec;
                ec.samples = fc.samples;
                for (double t : w.targets) ec.truths.push_back(ds.scaler.invert(t));
                if (cfg.regime_breakdown && ds.regimes[wi] >= 0)
                    regime_cases[ds.regimes[wi]].push_back(ec);
                cases.push_back(std::move(ec));
            }
            SeedEval se;
            se.seed = seed;
            RngStream pit_rng(seed, 0x9177);
            se.report = assemble_report(cases, pit_rng, cfg.coverage_levels, cfg.ql_levels);
            for (auto& [regime, rc] : regime_cases) {
                RngStream r(seed, 0x9178 + static_cast<std::uint64_t>(regime));
                se.by_regime.emplace(regime,
                                     assemble_report(rc, r, cfg.coverage_levels, cfg.ql_levels));
            }

            const std::string tag =
                head_kind_name(head) + "_seed" + std::to_string(seed);
            detail::write_text_file(cfg.out_dir + "/report_" + tag + ".csv",
                                    report_csv_rows(ds.source, head_kind_name(head), se.report));
            std::string curve = "nominal,empirical\n";
            for (const auto& [nom, emp] : coverage_curve(cases))
                curve += std::to_string(nom) + "," + std::to_string(emp) + "\n";
            detail::write_text_file(cfg.out_dir + "/coverage_curve_" + tag + ".csv", curve);
            RngStream hist_rng(seed, 0x9179);
            std::string hist = "bin,count\n";
            const auto counts = pit_histogram(cases, hist_rng);
            for (std::size_t b = 0; b < counts.size(); ++b)
                hist += std::to_string(b) + "," + std::to_string(counts[b]) + "\n";
            detail::write_text_file(cfg.out_dir + "/pit_histogram_" + tag + ".csv", hist);
            evals.push_back(std::move(se));
        }

        // Seed-averaged summary (mean and std per aggregate metric).
        auto collect = [&](auto getter) {
            double m = 0.0, s = 0.0;
            for (const auto& e : evals) m += getter(e.report.aggregate);
            m /= static_cast<double>(evals.size());
            for (const auto& e : evals) {
                const double d = getter(e.report.aggregate) - m;
                s += d * d;
            }
            s = evals.size() > 1 ? std::sqrt(s / static_cast<double>(evals.size() - 1)) : 0.0;
            return std::pair<double, double>{m, s};
        };
        std::map<std::string, std::pair<double, double>> summary;
        summary["crps"] = collect([](const HorizonMetrics& m) { return m.crps; });
        summary["tail_crps"] = collect([](const HorizonMetrics& m) { return m.tail_crps; });
        summary["ql"] = collect([](const HorizonMetrics& m) { return m.ql; });
        summary["pit_ks"] = collect([](const HorizonMetrics& m) { return m.pit_ks; });
        for (std::size_t i = 0; i < cfg.coverage_levels.size(); ++i) {
            summary["coverage_dev@" + std::to_string(cfg.coverage_levels[i])] =
                collect([i](const HorizonMetrics& m) { return m.coverage[i].second; });
        }
        for (const auto& [metric, ms] : summary)
            csv += ds.source + "," + head_kind_name(head) + "," + metric + "," +
                   std::to_string(ms.first) + "," + std::to_string(ms.second) + "\n";

        if (table.empty()) table = report_table_header(evals.front().report);
        for (const auto& e : evals)
            table += report_table_rows(head_kind_name(head) + "/s" + std::to_string(e.seed),
                                       e.report);

        if (cfg.regime_breakdown) {
            for (const auto& e : evals)
                for (const auto& [regime, rep] : e.by_regime)
                    table += report_table_rows(head_kind_name(head) + "/s" +
                                                   std::to_string(e.seed) + "/r" +
                                                   std::to_string(regime),
                                               rep);
        }
    }
    detail::write_text_file(cfg.out_dir + "/summary.csv",
                            "dataset,model,metric,mean,std\n" + csv);
    detail::write_text_file(cfg.out_dir + "/report.txt", table);
    std::cout << table;
    std::cout << "wrote " << cfg.out_dir << "/summary.csv\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg, std::int64_t window_index) {
    auto [ds, hash] = load_dataset_checked(cfg);
    const std::uint64_t seed = cfg.seeds.front();
    const auto ck = load_checkpoint(cfg.checkpoint_file(seed));
    if (ck.config_hash != hash)
        throw ArtifactMismatch(cfg.checkpoint_file(seed) + " carries config hash " +
                               ck.config_hash + ", dataset has " + hash);
    std::size_t wi;
    if (window_index < 0) {
        const auto test_idx = ds.indices_of(Split::test);
        if (test_idx.empty()) throw std::invalid_argument("dataset has no test windows");
        wi = test_idx.front();
    } else if (static_cast<std::size_t>(window_index) < ds.windows.size()) {
        wi = static_cast<std::size_t>(window_index);
    } else {
        throw std::invalid_argument("window index out of range");
    }

    const auto fc = forecast(ds.windows[wi].context, ck.params, ck.config, ck.scaler,
                             cfg.n_trajectories, forecast_seed(seed, wi));
    std::string csv = "horizon";
    for (int j = 0; j < cfg.n_trajectories; ++j) csv += ",traj_" + std::to_string(j + 1);
    csv += "\n";
    for (std::size_t h = 0; h < fc.samples.size(); ++h) {
        csv += std::to_string(h + 1);
        for (double v : fc.samples[h]) {
            char buf[32];
            std::snprintf(buf, sizeof buf, ",%.10g", v);
            csv += buf;
        }
        csv += "\n";
    }
    const std::string tag = "seed" + std::to_string(seed) + "_window" + std::to_string(wi);
    detail::write_text_file(cfg.out_dir + "/samples_" + tag + ".csv", csv);

    json laws = json::array();
    for (std::size_t h = 0; h < fc.laws.size(); ++h) {
        const auto& law = fc.laws[h];
        json entry{{"horizon", h + 1}, {"head_kind", head_kind_name(law.kind)}};
        if (law.kind == HeadKind::levy_mixture) {
            json comps = json::array();
            for (std::size_t k = 0; k < law.mixture.K(); ++k)
                comps.push_back(json{{"weight", law.mixture.weights[k]},
                                     {"alpha", law.mixture.components[k].alpha},
                                     {"beta", law.mixture.components[k].beta},
                                     {"gamma", law.mixture.components[k].gamma},
                                     {"delta", law.mixture.components[k].delta}});
            entry["components"] = std::move(comps);
        } else {
            json comps = json::array();
            for (const auto& l : law.baseline)
                comps.push_back(json{{"weight", l.weight},
                                     {"loc", l.loc},
                                     {"scale", l.scale},
                                     {"dof", l.dof},
                                     {"skew", l.skew}});
            entry["components"] = std::move(comps);
        }
        laws.push_back(std::move(entry));
    }
    detail::write_text_file(cfg.out_dir + "/sample_laws_" + tag + ".json",
                            json{{"config_hash", hash}, {"window", wi}, {"laws", laws}}.dump(1));
    write_effective_config(cfg);
    std::cout << "wrote " << cfg.out_dir << "/samples_" << tag << ".csv (" << fc.samples.size()
              << " horizons x " << cfg.n_trajectories << " trajectories)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heavy-tailed probabilistic sequence forecasting"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::string head;
    bool override_batch = false;
    std::int64_t window_index = -1;

    app.add_option("--config", config_path, "run configuration file (JSON)");
    app.add_option("--seed", seeds, "seed (repeatable; overrides the config seed list)");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--head", head,
                   "head kind: levy_mixture | gaussian | student_t | asym_student_t | "
                   "gaussian_mixture | student_t_mixture");
    app.add_flag("--override-batch", override_batch,
                 "allow batch sizes below 128 (desk-scale tests only)");

    auto* c_generate = app.add_subcommand("generate", "synthesize or ingest a dataset");
    auto* c_diagnose = app.add_subcommand("diagnose", "heavy-tail diagnostics of the source series");
    auto* c_train = app.add_subcommand("train", "train one checkpoint per seed");
    auto* c_evaluate = app.add_subcommand("evaluate", "score checkpoints on the test split");
    auto* c_sample = app.add_subcommand("sample", "write forecast trajectories for one window");
    c_sample->add_option("--window", window_index, "dataset window index (default: first test window)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (!seeds.empty()) cfg.seeds = seeds;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!head.empty()) cfg.model.head_kind = head_kind_from(head);
        if (override_batch) cfg.allow_small_batch = true;
        cfg.validate();

        if (c_generate->parsed()) return cmd_generate(cfg);
        if (c_diagnose->parsed()) return cmd_diagnose(cfg);
        if (c_train->parsed()) return cmd_train(cfg);
        if (c_evaluate->parsed()) return cmd_evaluate(cfg);
        if (c_sample->parsed()) return cmd_sample(cfg, window_index);
        std::cerr << "no command\n";
        return 2;
    } catch (const ArtifactMismatch& e) {
        std::cerr << "artifact mismatch: " << e.what() << "\n";
        return 4;
    } catch (const NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what();
        if (!e.dump_path.empty()) std::cerr << " (batch dump: " << e.dump_path << ")";
        std::cerr << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
