#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "levycast/data.hpp"
#include "levycast/grid.hpp"
#include "levycast/io.hpp"
#include "levycast/loss.hpp"
#include "levycast/network.hpp"
#include "levycast/optimizer.hpp"

namespace levycast {

struct TrainOptions {
    int epochs = 100;
    int batch_size = 256;
    double eta = 5e-4;
    bool uniform_weights = false;    // ablation: pin all frequency weights to 1
    bool allow_small_batch = false;  // desk-scale override of the B >= 128 floor
    std::uint64_t seed = 1;
    std::string nan_dump_path;       // offending-batch dump target ("" = no file)
};

struct TrainLogRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;  // pre-clip, mean over the epoch's steps
    double lr = 0.0;
};

struct TrainResult {
    ParamStore params;  // weights at the best validation epoch
    std::vector<TrainLogRow> log;
    double best_val_loss = 0.0;
    int best_epoch = -1;
};

// Thrown when the objective stops being finite. The predicted parameters of
// the offending batch are dumped first so the failure is inspectable.
struct NumericalAbort : std::runtime_error {
    std::string dump_path;
    explicit NumericalAbort(const std::string& msg, std::string dump)
        : std::runtime_error(msg), dump_path(std::move(dump)) {}
};

namespace detail {

// Forward graph for one teacher-forced batch: encode the contexts, roll the
// decoder across horizons feeding realized targets (the first feedback is
// the last context observation), project heads at every step.
struct BatchGraph {
    GraphParams gp;
    std::vector<HeadRefs> horizons;
    LossRefs loss;
};

inline BatchGraph build_batch_graph(ad::Tape& t, const ModelConfig& cfg, const ParamStore& ps,
                                    const ad::Tensor& contexts, const ad::Tensor& targets,
                                    const FrequencyGrid& grid, bool uniform_weights,
                                    bool with_grad,
                                    const std::vector<std::vector<MixtureParams>>* weight_anchor =
                                        nullptr) {
    BatchGraph g;
    g.gp = inject_params(t, ps, with_grad);
    const auto ctx = t.input(contexts);
    const auto tgt = t.input(targets);
    const auto c = encode(t, cfg, ps, g.gp, ctx);
    DecoderState state = decoder_init(t, cfg, c);
    for (int h = 0; h < cfg.H; ++h) {
        const auto feedback = (h == 0) ? t.slice_cols(ctx, cfg.T - 1, cfg.T)
                                       : t.slice_cols(tgt, h - 1, h);
        const auto hidden = decode_step(t, cfg, ps, g.gp, c, state, feedback);
        g.horizons.push_back(project_heads(t, cfg, ps, g.gp, hidden));
    }
    g.loss = (cfg.head_kind == HeadKind::levy_mixture)
                 ? build_spectral_loss(t, cfg, grid, g.horizons, targets, uniform_weights,
                                       weight_anchor)
                 : build_nll_loss(t, cfg, g.horizons, targets);
    return g;
}

inline void fill_batch(const WindowedDataset& ds, const std::vector<std::size_t>& idx,
                       std::size_t from, std::size_t count, ad::Tensor& contexts,
                       ad::Tensor& targets) {
    contexts = ad::Tensor(static_cast<int>(count), ds.T);
    targets = ad::Tensor(static_cast<int>(count), ds.H);
    for (std::size_t b = 0; b < count; ++b) {
        const Window& w = ds.windows[idx[from + b]];
        for (int j = 0; j < ds.T; ++j) contexts.at(static_cast<int>(b), j) = w.context[j];
        for (int j = 0; j < ds.H; ++j) targets.at(static_cast<int>(b), j) = w.targets[j];
    }
}

// Teacher-forced loss over a window set, in chunks; per-window mean matches
// the training reduction exactly (loss is a batch mean of per-window sums).
inline double evaluate_loss(const WindowedDataset& ds, const std::vector<std::size_t>& idx,
                            const ModelConfig& cfg, const ParamStore& ps,
                            const FrequencyGrid& grid, bool uniform_weights,
                            std::size_t chunk) {
    double weighted = 0.0;
    for (std::size_t from = 0; from < idx.size(); from += chunk) {
        const std::size_t count = std::min(chunk, idx.size() - from);
        ad::Tensor contexts, targets;
        fill_batch(ds, idx, from, count, contexts, targets);
        ad::Tape t(false);
        const auto g = build_batch_graph(t, cfg, ps, contexts, targets, grid, uniform_weights,
                                         false);
        weighted += t.scalar_val(g.loss.total) * static_cast<double>(count);
    }
    return weighted / static_cast<double>(idx.size());
}

inline json batch_dump_json(const ad::Tape& t, const BatchGraph& g, const ModelConfig& cfg,
                            int epoch, std::size_t batch_index,
                            const std::vector<std::size_t>& window_indices) {
    json horizons = json::array();
    for (const auto& refs : g.horizons) {
        json h;
        auto put = [&](const char* name, ad::Tape::Ref r) {
            if (r < 0) return;
            const auto& v = t.val(r);
            h[name] = json{{"rows", v.rows}, {"cols", v.cols}, {"data", v.v}};
        };
        put("pi", refs.pi);
        put("alpha", refs.alpha);
        put("beta", refs.beta);
        put("gamma", refs.gamma);
        put("delta", refs.delta);
        put("dof", refs.dof);
        put("skew", refs.skew);
        horizons.push_back(std::move(h));
    }
    return json{{"epoch", epoch},
                {"batch_index", batch_index},
                {"head_kind", head_kind_name(cfg.head_kind)},
                {"window_indices", window_indices},
                {"horizons", std::move(horizons)}};
}

}  // namespace detail

// Teacher-forced objective over one split of the dataset; this is exactly
// the quantity the training log records as val_loss, so re-running it on a
// saved checkpoint must reproduce the logged value.
inline double validation_loss(const WindowedDataset& ds, const ModelConfig& cfg,
                              const ParamStore& ps, Split split = Split::val,
                              bool uniform_weights = false, std::size_t chunk = 256) {
    const auto idx = ds.indices_of(split);
    if (idx.empty()) throw std::invalid_argument("no windows in the requested split");
    const auto grid = make_grid(cfg.grid_m, cfg.tau_max);
    return detail::evaluate_loss(ds, idx, cfg, ps, grid, uniform_weights, chunk);
}

// Minimize the configured objective with clipped adaptive-moment steps and
// cosine-annealed learning rate; keep the weights from the best validation
// epoch. Deterministic for a fixed (dataset, config, options) triple.
inline TrainResult train(const WindowedDataset& ds, const ModelConfig& cfg,
                         const TrainOptions& opt) {
    cfg.validate();
    if (ds.T != cfg.T || ds.H != cfg.H)
        throw std::invalid_argument("dataset window shape does not match the model config");
    if (opt.epochs < 1) throw std::invalid_argument("epochs must be positive");
    if (opt.batch_size < 128 && !opt.allow_small_batch)
        throw std::invalid_argument(
            "batch size " + std::to_string(opt.batch_size) +
            " is below 128; the spectral objective needs large batches for the empirical-CF "
            "variance bound to bite (use the small-batch override only for desk tests)");

    const auto train_idx = ds.indices_of(Split::train);
    const auto val_idx = ds.indices_of(Split::val);
    if (train_idx.empty()) throw std::invalid_argument("no training windows");
    const std::size_t B = std::min<std::size_t>(static_cast<std::size_t>(opt.batch_size),
                                                train_idx.size());
    const std::size_t batches = train_idx.size() / B;  // remainder dropped
    const long total_steps = static_cast<long>(batches) * opt.epochs;
    const auto grid = make_grid(cfg.grid_m, cfg.tau_max);

    ParamStore params = init_params(cfg, opt.seed);
    Adam adam;
    RngStream shuffle_rng(opt.seed, 0x5A0FF1E);
    std::vector<std::size_t> order = train_idx;

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    long step = 0;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j =
                static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i));
            std::swap(order[i - 1], order[std::min(j, i - 1)]);
        }
        double loss_sum = 0.0, ent_sum = 0.0, norm_sum = 0.0, lr = 0.0;
        for (std::size_t bi = 0; bi < batches; ++bi) {
            ad::Tensor contexts, targets;
            detail::fill_batch(ds, order, bi * B, B, contexts, targets);
            ad::Tape t(true);
            const auto g = detail::build_batch_graph(t, cfg, params, contexts, targets, grid,
                                                     opt.uniform_weights, true);
            const double loss_val = t.scalar_val(g.loss.total);
            if (!std::isfinite(loss_val)) {
                std::string dump;
                if (!opt.nan_dump_path.empty()) {
                    std::vector<std::size_t> wins(order.begin() + static_cast<std::ptrdiff_t>(bi * B),
                                                  order.begin() + static_cast<std::ptrdiff_t>(bi * B + B));
                    detail::write_text_file(
                        opt.nan_dump_path,
                        detail::batch_dump_json(t, g, cfg, epoch, bi, wins).dump(1));
                    dump = opt.nan_dump_path;
                }
                throw NumericalAbort("non-finite training loss at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(bi),
                                     dump);
            }
            t.backward(g.loss.total);
            std::vector<ad::Tensor*> prm(params.tensors.size());
            std::vector<const ad::Tensor*> grd(params.tensors.size());
            for (std::size_t p = 0; p < params.tensors.size(); ++p) {
                prm[p] = &params.tensors[p];
                grd[p] = &t.grad(g.gp.refs[p]);
            }
            lr = cosine_lr(opt.eta, step, total_steps);
            norm_sum += adam.clip_and_step(prm, grd, lr);
            ++step;
            loss_sum += loss_val;
            if (g.loss.entropy >= 0) ent_sum += t.scalar_val(g.loss.entropy);
        }

        TrainLogRow row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(batches);
        row.entropy = ent_sum / static_cast<double>(batches);
        row.grad_norm = norm_sum / static_cast<double>(batches);
        row.lr = lr;
        row.val_loss = val_idx.empty()
                           ? row.train_loss
                           : detail::evaluate_loss(ds, val_idx, cfg, params, grid,
                                                   opt.uniform_weights, B);
        result.log.push_back(row);
        if (row.val_loss < result.best_val_loss) {
            result.best_val_loss = row.val_loss;
            result.best_epoch = epoch;
            result.params = params;
        }
    }
    if (result.best_epoch < 0) {  // every epoch non-improving (e.g. NaN-free but flat)
        result.params = params;
        result.best_epoch = opt.epochs - 1;
        result.best_val_loss = result.log.back().val_loss;
    }
    return result;
}

// One forecast law for one horizon, in original data units.
struct BaselineLaw {
    double weight = 1.0;
    double loc = 0.0;
    double scale = 0.0;
    double dof = 0.0;   // Student-t family only
    double skew = 0.0;  // two-piece head only
};

struct HorizonLaw {
    HeadKind kind = HeadKind::levy_mixture;
    MixtureParams mixture;              // stable-mixture head
    std::vector<BaselineLaw> baseline;  // every other head (K entries)
};

struct ForecastResult {
    std::vector<HorizonLaw> laws;              // trajectory 1's parameter path, original units
    std::vector<std::vector<double>> samples;  // H rows x n_trajectories columns, original units
};

namespace detail {

inline double student_t_draw(double nu, RngStream& rng) {
    return rng.normal() / std::sqrt(rng.chi_squared(nu) / nu);
}

// Two-piece (skewed) Student-t draw with skewing factor xi > 0: the positive
// side carries probability xi^2 / (1 + xi^2) and is stretched by xi.
inline double asym_student_t_draw(double nu, double xi, RngStream& rng) {
    const double mag = std::fabs(student_t_draw(nu, rng));
    const double p_right = xi * xi / (1.0 + xi * xi);
    return rng.uniform() < p_right ? xi * mag : -mag / xi;
}

// Draw one standardized value from the head law at `row` of the refs, and
// record the law itself (standardized units) when wanted.
inline double sample_head(const ad::Tape& t, const ModelConfig& cfg, const HeadRefs& refs,
                          int row, RngStream& rng, HorizonLaw* law_out) {
    if (cfg.head_kind == HeadKind::levy_mixture) {
        const MixtureParams mix = mixture_from_refs(t, refs, row);
        if (law_out) {
            law_out->kind = cfg.head_kind;
            law_out->mixture = mix;
        }
        return sample_mixture(mix, rng);
    }
    const auto& pi = t.val(refs.pi);
    const int K = pi.cols;
    std::vector<BaselineLaw> laws(static_cast<std::size_t>(K));
    std::vector<double> weights(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        BaselineLaw& l = laws[static_cast<std::size_t>(k)];
        l.weight = pi.at(row, k);
        l.loc = t.val(refs.delta).at(row, k);
        l.scale = t.val(refs.gamma).at(row, k);
        if (refs.dof >= 0) l.dof = t.val(refs.dof).at(row, k);
        if (refs.skew >= 0) l.skew = t.val(refs.skew).at(row, k);
        weights[static_cast<std::size_t>(k)] = l.weight;
    }
    if (law_out) {
        law_out->kind = cfg.head_kind;
        law_out->baseline = laws;
    }
    const std::size_t k = sample_component(weights, rng);
    const BaselineLaw& l = laws[k];
    switch (cfg.head_kind) {
        case HeadKind::gaussian:
        case HeadKind::gaussian_mixture:
            return l.loc + l.scale * rng.normal();
        case HeadKind::student_t:
        case HeadKind::student_t_mixture:
            return l.loc + l.scale * student_t_draw(l.dof, rng);
        case HeadKind::asym_student_t: {
            const double lam = l.skew;
            const double xi = std::sqrt((1.0 + lam) / (1.0 - lam));
            return l.loc + l.scale * asym_student_t_draw(l.dof, xi, rng);
        }
        case HeadKind::levy_mixture: break;
    }
    throw std::logic_error("unreachable");
}

// Map a standardized-unit law to original units: an affine map x -> s x + c
// sends scale to s * scale and location to s * location + c; shape
// parameters (alpha, beta, dof, skew) are affine-invariant.
inline void law_to_original_units(HorizonLaw& law, const Scaler& sc) {
    for (auto& comp : law.mixture.components) {
        comp.gamma *= sc.spread;
        comp.delta = comp.delta * sc.spread + sc.center;
    }
    for (auto& l : law.baseline) {
        l.scale *= sc.spread;
        l.loc = l.loc * sc.spread + sc.center;
    }
}

}  // namespace detail

// Ancestral-sampling inference: encode once, then for each trajectory roll
// the decoder H steps, sampling from the emitted law at each step and
// feeding the sample back (never a conditional mean, which need not exist
// for stable laws). Trajectory j uses its own RNG stream, so results are
// independent of evaluation order.
inline ForecastResult forecast(const std::vector<double>& context_std, const ParamStore& ps,
                               const ModelConfig& cfg, const Scaler& scaler, int n_trajectories,
                               std::uint64_t seed) {
    cfg.validate();
    if (static_cast<int>(context_std.size()) != cfg.T)
        throw std::invalid_argument("context length does not match the configured T");
    if (n_trajectories < 1) throw std::invalid_argument("need at least one trajectory");

    ad::Tensor ctx(1, cfg.T, context_std);
    ad::Tensor c_val;
    {
        ad::Tape t(false);
        const auto gp = inject_params(t, ps, false);
        c_val = t.val(encode(t, cfg, ps, gp, t.input(ctx)));
    }

    ForecastResult result;
    result.laws.resize(static_cast<std::size_t>(cfg.H));
    result.samples.assign(static_cast<std::size_t>(cfg.H),
                          std::vector<double>(static_cast<std::size_t>(n_trajectories), 0.0));
    for (int j = 0; j < n_trajectories; ++j) {
        RngStream rng(seed, 0xF0C0 + static_cast<std::uint64_t>(j));
        ad::Tape t(false);
        const auto gp = inject_params(t, ps, false);
        const auto c = t.input(c_val);
        DecoderState state = decoder_init(t, cfg, c);
        double feedback = context_std.back();
        for (int h = 0; h < cfg.H; ++h) {
            const auto fb = t.input(ad::Tensor(1, 1, {feedback}));
            const auto hidden = decode_step(t, cfg, ps, gp, c, state, fb);
            const auto refs = project_heads(t, cfg, ps, gp, hidden);
            HorizonLaw* law_out = (j == 0) ? &result.laws[static_cast<std::size_t>(h)] : nullptr;
            const double draw = detail::sample_head(t, cfg, refs, 0, rng, law_out);
            result.samples[static_cast<std::size_t>(h)][static_cast<std::size_t>(j)] =
                scaler.invert(draw);
            feedback = draw;
        }
    }
    for (auto& law : result.laws) detail::law_to_original_units(law, scaler);
    return result;
}

}  // namespace levycast
