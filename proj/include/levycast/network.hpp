#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "levycast/autodiff.hpp"
#include "levycast/mixture.hpp"
#include "levycast/rng.hpp"
#include "levycast/stable.hpp"

namespace levycast {

enum class HeadKind {
    levy_mixture,
    gaussian,
    student_t,
    asym_student_t,
    gaussian_mixture,
    student_t_mixture,
};

inline std::string head_kind_name(HeadKind h) {
    switch (h) {
        case HeadKind::levy_mixture: return "levy_mixture";
        case HeadKind::gaussian: return "gaussian";
        case HeadKind::student_t: return "student_t";
        case HeadKind::asym_student_t: return "asym_student_t";
        case HeadKind::gaussian_mixture: return "gaussian_mixture";
        case HeadKind::student_t_mixture: return "student_t_mixture";
    }
    throw std::logic_error("unreachable");
}

inline HeadKind head_kind_from(const std::string& s) {
    if (s == "levy_mixture") return HeadKind::levy_mixture;
    if (s == "gaussian") return HeadKind::gaussian;
    if (s == "student_t") return HeadKind::student_t;
    if (s == "asym_student_t") return HeadKind::asym_student_t;
    if (s == "gaussian_mixture") return HeadKind::gaussian_mixture;
    if (s == "student_t_mixture") return HeadKind::student_t_mixture;
    throw std::invalid_argument("unknown head kind: " + s);
}

inline bool head_is_mixture(HeadKind h) {
    return h == HeadKind::levy_mixture || h == HeadKind::gaussian_mixture ||
           h == HeadKind::student_t_mixture;
}

struct ModelConfig {
    int hidden_dim = 128;
    int encoder_layers = 2;
    int decoder_layers = 1;
    int K = 3;
    int T = 50;  // context length
    int H = 20;  // forecast horizon
    double alpha_min = numeric::alpha_min;
    double alpha_max = numeric::alpha_max;
    double eps_beta_max = numeric::eps_beta_max;
    double eps_gamma = numeric::eps_gamma;
    double lambda_ent = 0.01;
    int grid_m = 129;
    double tau_max = numeric::tau_max;
    HeadKind head_kind = HeadKind::levy_mixture;

    // Number of per-horizon projection columns for the configured head.
    int head_components() const { return head_is_mixture(head_kind) ? K : 1; }

    void validate() const {
        if (!(alpha_min < alpha_max && alpha_max <= 2.0))
            throw std::invalid_argument("alpha bounds must satisfy alpha_min < alpha_max <= 2");
        if (!(eps_beta_max > 0.0 && eps_beta_max < 1.0))
            throw std::invalid_argument("skewness margin must lie in (0, 1)");
        if (K < 1 || T < 1 || H < 1 || hidden_dim < 1 || encoder_layers < 1 ||
            decoder_layers < 1)
            throw std::invalid_argument("model dimensions must be positive");
        if (grid_m < 2) throw std::invalid_argument("frequency grid too small");
    }
};

// Ordered named tensors: order fixes the optimizer slot layout and the
// checkpoint serialization.
struct ParamStore {
    std::vector<std::string> names;
    std::vector<ad::Tensor> tensors;

    void add(const std::string& name, ad::Tensor t) {
        names.push_back(name);
        tensors.push_back(std::move(t));
    }
    int find(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }
    ad::Tensor& operator[](const std::string& name) {
        int i = find(name);
        if (i < 0) throw std::out_of_range("no parameter named " + name);
        return tensors[i];
    }
    const ad::Tensor& operator[](const std::string& name) const {
        int i = find(name);
        if (i < 0) throw std::out_of_range("no parameter named " + name);
        return tensors[i];
    }
    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& t : tensors) n += t.size();
        return n;
    }
};

namespace detail {
inline ad::Tensor uniform_init(int rows, int cols, double bound, RngStream& rng) {
    ad::Tensor t(rows, cols);
    for (auto& v : t.v) v = rng.uniform_open(-bound, bound);
    return t;
}
}  // namespace detail

// Fresh parameters for the configured backbone and head. The encoder and
// decoder shapes are identical across heads; only head.* tensors differ.
inline ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    RngStream rng(seed, 0xA11C0DE);
    ParamStore ps;
    const int d = cfg.hidden_dim;
    for (int l = 0; l < cfg.encoder_layers; ++l) {
        const int in = (l == 0) ? 1 : d;
        const double bx = 1.0 / std::sqrt(static_cast<double>(in));
        const double bh = 1.0 / std::sqrt(static_cast<double>(d));
        ps.add("enc" + std::to_string(l) + ".Wx", detail::uniform_init(in, 4 * d, bx, rng));
        ps.add("enc" + std::to_string(l) + ".Wh", detail::uniform_init(d, 4 * d, bh, rng));
        ad::Tensor b(1, 4 * d, 0.0);
        for (int j = d; j < 2 * d; ++j) b.v[j] = 1.0;  // forget-gate bias
        ps.add("enc" + std::to_string(l) + ".b", std::move(b));
    }
    for (int l = 0; l < cfg.decoder_layers; ++l) {
        const int in = (l == 0) ? d + 1 : d;  // context vector plus scalar feedback
        const double bx = 1.0 / std::sqrt(static_cast<double>(in));
        const double bh = 1.0 / std::sqrt(static_cast<double>(d));
        ps.add("dec" + std::to_string(l) + ".Wx", detail::uniform_init(in, 4 * d, bx, rng));
        ps.add("dec" + std::to_string(l) + ".Wh", detail::uniform_init(d, 4 * d, bh, rng));
        ad::Tensor b(1, 4 * d, 0.0);
        for (int j = d; j < 2 * d; ++j) b.v[j] = 1.0;
        ps.add("dec" + std::to_string(l) + ".b", std::move(b));
    }
    const double bd = 1.0 / std::sqrt(static_cast<double>(d));
    const int K = cfg.head_components();
    switch (cfg.head_kind) {
        case HeadKind::levy_mixture:
            ps.add("head.pi", detail::uniform_init(d, K, bd, rng));
            ps.add("head.alpha", detail::uniform_init(d, K, bd, rng));
            ps.add("head.beta", detail::uniform_init(d, K, bd, rng));
            ps.add("head.gamma", detail::uniform_init(d, K, bd, rng));
            ps.add("head.delta", detail::uniform_init(d, K, bd, rng));
            break;
        case HeadKind::gaussian:
        case HeadKind::gaussian_mixture:
            if (head_is_mixture(cfg.head_kind))
                ps.add("head.pi", detail::uniform_init(d, K, bd, rng));
            ps.add("head.loc", detail::uniform_init(d, K, bd, rng));
            ps.add("head.scale", detail::uniform_init(d, K, bd, rng));
            break;
        case HeadKind::student_t:
        case HeadKind::student_t_mixture:
            if (head_is_mixture(cfg.head_kind))
                ps.add("head.pi", detail::uniform_init(d, K, bd, rng));
            ps.add("head.loc", detail::uniform_init(d, K, bd, rng));
            ps.add("head.scale", detail::uniform_init(d, K, bd, rng));
            ps.add("head.dof", detail::uniform_init(d, K, bd, rng));
            break;
        case HeadKind::asym_student_t:
            ps.add("head.loc", detail::uniform_init(d, K, bd, rng));
            ps.add("head.scale", detail::uniform_init(d, K, bd, rng));
            ps.add("head.dof", detail::uniform_init(d, K, bd, rng));
            ps.add("head.skew", detail::uniform_init(d, K, bd, rng));
            break;
    }
    return ps;
}

// Tape-resident handles for one forward pass. Parameters are injected as
// leaves each time a tape is built; gradients are read back by name order.
struct GraphParams {
    std::vector<ad::Tape::Ref> refs;  // aligned with ParamStore order
    ad::Tape::Ref of(const ParamStore& ps, const std::string& name) const {
        int i = ps.find(name);
        if (i < 0) throw std::out_of_range("no parameter named " + name);
        return refs[static_cast<std::size_t>(i)];
    }
};

inline GraphParams inject_params(ad::Tape& tape, const ParamStore& ps,
                                 bool requires_grad = true) {
    GraphParams gp;
    gp.refs.reserve(ps.tensors.size());
    for (const auto& t : ps.tensors) gp.refs.push_back(tape.input(t, requires_grad));
    return gp;
}

// One LSTM cell step: gates = x Wx + h Wh + b in [input, forget, cell,
// output] order; c' = f c + i g; h' = o tanh(c').
struct LstmState {
    ad::Tape::Ref h;
    ad::Tape::Ref c;
};

inline LstmState lstm_step(ad::Tape& t, ad::Tape::Ref x, LstmState s, ad::Tape::Ref Wx,
                           ad::Tape::Ref Wh, ad::Tape::Ref b, int d) {
    auto gates = t.add(t.add(t.matmul(x, Wx), t.matmul(s.h, Wh)), b);
    auto i = t.sigmoid(t.slice_cols(gates, 0, d));
    auto f = t.sigmoid(t.slice_cols(gates, d, 2 * d));
    auto g = t.tanh_(t.slice_cols(gates, 2 * d, 3 * d));
    auto o = t.sigmoid(t.slice_cols(gates, 3 * d, 4 * d));
    auto c_new = t.add(t.mul(f, s.c), t.mul(i, g));
    auto h_new = t.mul(o, t.tanh_(c_new));
    return {h_new, c_new};
}

// Encoder: stacked LSTM over the context, scalar input per step, zero
// initial states. Returns the top layer's final hidden state (B, d).
inline ad::Tape::Ref encode(ad::Tape& t, const ModelConfig& cfg, const ParamStore& ps,
                            const GraphParams& gp, ad::Tape::Ref contexts /* (B, T) */) {
    const int d = cfg.hidden_dim;
    const int B = t.val(contexts).rows;
    if (t.val(contexts).cols != cfg.T)
        throw std::invalid_argument("context length does not match the configured T");
    std::vector<LstmState> states(cfg.encoder_layers);
    for (auto& s : states) {
        s.h = t.constant(B, d, 0.0);
        s.c = t.constant(B, d, 0.0);
    }
    for (int step = 0; step < cfg.T; ++step) {
        ad::Tape::Ref x = t.slice_cols(contexts, step, step + 1);
        for (int l = 0; l < cfg.encoder_layers; ++l) {
            const std::string pre = "enc" + std::to_string(l);
            states[l] = lstm_step(t, x, states[l], gp.of(ps, pre + ".Wx"),
                                  gp.of(ps, pre + ".Wh"), gp.of(ps, pre + ".b"), d);
            x = states[l].h;
        }
    }
    return states.back().h;
}

// Decoder state across horizons: hidden states start at the context vector
// c, cells start at zero.
struct DecoderState {
    std::vector<LstmState> layers;
};

inline DecoderState decoder_init(ad::Tape& t, const ModelConfig& cfg, ad::Tape::Ref c) {
    const int B = t.val(c).rows;
    DecoderState s;
    s.layers.resize(cfg.decoder_layers);
    for (auto& l : s.layers) {
        l.h = c;
        l.c = t.constant(B, cfg.hidden_dim, 0.0);
    }
    return s;
}

// One decoder step. The cell input fuses the static context vector with the
// scalar feedback (realized target during training, sampled value at
// inference; never a conditional mean, which need not exist here).
inline ad::Tape::Ref decode_step(ad::Tape& t, const ModelConfig& cfg, const ParamStore& ps,
                                 const GraphParams& gp, ad::Tape::Ref c, DecoderState& state,
                                 ad::Tape::Ref y_feedback /* (B, 1) */) {
    const int d = cfg.hidden_dim;
    ad::Tape::Ref x = t.concat_cols(c, y_feedback);
    for (int l = 0; l < cfg.decoder_layers; ++l) {
        const std::string pre = "dec" + std::to_string(l);
        state.layers[l] = lstm_step(t, x, state.layers[l], gp.of(ps, pre + ".Wx"),
                                    gp.of(ps, pre + ".Wh"), gp.of(ps, pre + ".b"), d);
        x = state.layers[l].h;
    }
    return state.layers.back().h;
}

// Tape-resident head outputs for one horizon; every field is (B, K) except
// as noted. Unused fields for a given head kind stay -1.
struct HeadRefs {
    ad::Tape::Ref pi = -1;     // mixing weights (simplex rows)
    ad::Tape::Ref alpha = -1;  // stability head
    ad::Tape::Ref beta = -1;   // skewness head
    ad::Tape::Ref gamma = -1;  // scale head (also baseline scale)
    ad::Tape::Ref delta = -1;  // location head (also baseline location)
    ad::Tape::Ref dof = -1;    // baseline degrees of freedom
    ad::Tape::Ref skew = -1;   // baseline skewness
};

// Constrained projections from a hidden state. All output invariants hold
// by construction for arbitrary finite inputs including saturated ones:
//   pi rows on the simplex; alpha in [alpha_min, alpha_max];
//   |beta| < 1 - eps_beta_max; gamma > eps_gamma floor.
inline HeadRefs project_heads(ad::Tape& t, const ModelConfig& cfg, const ParamStore& ps,
                              const GraphParams& gp, ad::Tape::Ref h) {
    HeadRefs out;
    const int B = t.val(h).rows;
    switch (cfg.head_kind) {
        case HeadKind::levy_mixture: {
            out.pi = t.softmax_rows(t.matmul(h, gp.of(ps, "head.pi")));
            out.alpha = t.add_const(
                t.scale(t.sigmoid(t.matmul(h, gp.of(ps, "head.alpha"))), cfg.alpha_max - cfg.alpha_min),
                cfg.alpha_min);
            out.beta = t.scale(t.tanh_(t.matmul(h, gp.of(ps, "head.beta"))), 1.0 - cfg.eps_beta_max);
            out.gamma = t.add_const(t.softplus(t.matmul(h, gp.of(ps, "head.gamma"))), cfg.eps_gamma);
            out.delta = t.matmul(h, gp.of(ps, "head.delta"));
            break;
        }
        case HeadKind::gaussian:
        case HeadKind::gaussian_mixture: {
            if (head_is_mixture(cfg.head_kind))
                out.pi = t.softmax_rows(t.matmul(h, gp.of(ps, "head.pi")));
            else
                out.pi = t.constant(B, 1, 1.0);
            out.delta = t.matmul(h, gp.of(ps, "head.loc"));
            out.gamma = t.add_const(t.softplus(t.matmul(h, gp.of(ps, "head.scale"))), 1e-12);
            break;
        }
        case HeadKind::student_t:
        case HeadKind::student_t_mixture:
        case HeadKind::asym_student_t: {
            if (head_is_mixture(cfg.head_kind))
                out.pi = t.softmax_rows(t.matmul(h, gp.of(ps, "head.pi")));
            else
                out.pi = t.constant(B, 1, 1.0);
            out.delta = t.matmul(h, gp.of(ps, "head.loc"));
            out.gamma = t.add_const(t.softplus(t.matmul(h, gp.of(ps, "head.scale"))), 1e-12);
            out.dof = t.add_const(t.softplus(t.matmul(h, gp.of(ps, "head.dof"))), 2.0 + 1e-12);
            if (cfg.head_kind == HeadKind::asym_student_t)
                out.skew = t.tanh_(t.matmul(h, gp.of(ps, "head.skew")));
            break;
        }
    }
    return out;
}

// Value-level mixture extraction for one batch row of head outputs.
inline MixtureParams mixture_from_refs(const ad::Tape& t, const HeadRefs& refs, int row) {
    const auto& pi = t.val(refs.pi);
    MixtureParams m;
    const int K = pi.cols;
    m.weights.resize(K);
    m.components.resize(K);
    for (int k = 0; k < K; ++k) {
        m.weights[k] = pi.at(row, k);
        m.components[k] = StableParams{t.val(refs.alpha).at(row, k), t.val(refs.beta).at(row, k),
                                       t.val(refs.gamma).at(row, k), t.val(refs.delta).at(row, k)};
    }
    return m;
}

}  // namespace levycast
