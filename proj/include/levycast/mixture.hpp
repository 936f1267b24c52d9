#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "levycast/grid.hpp"
#include "levycast/sampler.hpp"
#include "levycast/stable.hpp"

namespace levycast {

// K-component stable mixture: the distributional output for one horizon.
struct MixtureParams {
    std::vector<double> weights;          // simplex, length K
    std::vector<StableParams> components; // length K

    std::size_t K() const { return weights.size(); }

    bool valid() const {
        if (weights.empty() || weights.size() != components.size()) return false;
        double s = 0.0;
        for (double w : weights) {
            if (w < 0.0) return false;
            s += w;
        }
        if (std::fabs(s - 1.0) > 1e-9) return false;
        for (const auto& c : components)
            if (!c.valid()) return false;
        return true;
    }
};

// Mixture-weighted scale and stability index. Both are convex combinations
// of component values and are used only inside the frequency weighting,
// where they are treated as constants (no gradient flows through them).
struct EffectiveParams {
    double gamma_eff;
    double alpha_eff;
};

inline EffectiveParams effective_params(const MixtureParams& mix) {
    EffectiveParams e{0.0, 0.0};
    for (std::size_t k = 0; k < mix.K(); ++k) {
        e.gamma_eff += mix.weights[k] * mix.components[k].gamma;
        e.alpha_eff += mix.weights[k] * mix.components[k].alpha;
    }
    return e;
}

// Phi(tau_m) = sum_k pi_k phi_k(tau_m). Convexity keeps |Phi| <= 1.
inline std::vector<Complex> mixture_cf(const MixtureParams& mix, const FrequencyGrid& grid) {
    std::vector<Complex> out(grid.size(), Complex{0.0, 0.0});
    for (std::size_t k = 0; k < mix.K(); ++k) {
        for (std::size_t m = 0; m < grid.size(); ++m) {
            out[m] = out[m] + mix.weights[k] * cf(mix.components[k], grid.points[m]);
        }
    }
    return out;
}

// w(tau) = exp(-|gamma_eff tau|^alpha_eff): decays at the same rate as the
// predicted CF envelope, so every frequency contributes at a comparable
// signal-to-weight ratio. w(0) = 1; strictly decreasing in |tau|.
inline std::vector<double> adaptive_weights(const EffectiveParams& eff,
                                            const FrequencyGrid& grid) {
    std::vector<double> w(grid.size());
    for (std::size_t m = 0; m < grid.size(); ++m) {
        w[m] = std::exp(-std::pow(std::fabs(eff.gamma_eff * grid.points[m]), eff.alpha_eff));
    }
    return w;
}

// Single-observation empirical CF: e^{i tau y} on the grid; unit modulus.
inline std::vector<Complex> empirical_cf(double y, const FrequencyGrid& grid) {
    std::vector<Complex> out(grid.size());
    for (std::size_t m = 0; m < grid.size(); ++m) {
        out[m] = {std::cos(grid.points[m] * y), std::sin(grid.points[m] * y)};
    }
    return out;
}

// Batch-mean empirical CF at one frequency: (1/B) sum_b e^{i tau y_b}.
// The sum of the variances of its real and imaginary parts is
// (1 - |phi(tau)|^2) / B <= 1/B for i.i.d. draws from any law with CF phi.
inline Complex ecf_batch_mean(const std::vector<double>& ys, double tau) {
    if (ys.empty()) throw std::invalid_argument("empty batch");
    Complex acc{0.0, 0.0};
    for (double y : ys) {
        acc.re += std::cos(tau * y);
        acc.im += std::sin(tau * y);
    }
    const double inv = 1.0 / static_cast<double>(ys.size());
    return {acc.re * inv, acc.im * inv};
}

// Spectral loss over a B x H panel of predicted mixtures and realized
// targets:
//
//   L = (1/B) sum_b sum_h  [ sum_m w_hb(tau_m) |Phi_hb(tau_m) - e^{i tau_m y_hb}|^2 ]
//                          / [ sum_m w_hb(tau_m) + eps_w ]
//
// with both sums over the masked-in frequencies only (|tau| > eps_tau) and
// per-(h,b) weights from that prediction's own effective parameters.
// Horizons are summed, the batch is averaged. uniform_weights = true is the
// ablation switch: all weights pinned to 1.
//
// This is the value-level evaluator used by tests and reporting; training
// uses the autodiff mirror, and a dedicated test pins the two together.
inline double cf_loss(const std::vector<std::vector<MixtureParams>>& mixes,
                      const std::vector<std::vector<double>>& targets,
                      const FrequencyGrid& grid, bool uniform_weights = false) {
    const std::size_t B = mixes.size();
    if (B == 0 || targets.size() != B) throw std::invalid_argument("batch shape mismatch");
    const std::size_t H = mixes[0].size();
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        if (mixes[b].size() != H || targets[b].size() != H)
            throw std::invalid_argument("horizon shape mismatch");
        for (std::size_t h = 0; h < H; ++h) {
            const auto& mix = mixes[b][h];
            const auto phi = mixture_cf(mix, grid);
            const auto w = uniform_weights
                               ? std::vector<double>(grid.size(), 1.0)
                               : adaptive_weights(effective_params(mix), grid);
            double num = 0.0, den = 0.0;
            for (std::size_t m = 0; m < grid.size(); ++m) {
                if (!grid.include_mask[m]) continue;
                const double tau = grid.points[m];
                const double er = std::cos(tau * targets[b][h]);
                const double ei = std::sin(tau * targets[b][h]);
                const double dr = phi[m].re - er;
                const double di = phi[m].im - ei;
                num += w[m] * (dr * dr + di * di);
                den += w[m];
            }
            total += num / (den + numeric::eps_w);
        }
    }
    return total / static_cast<double>(B);
}

// Mean Shannon entropy of the mixing weights:
//   Hbar = (1/(B H)) sum_{b,h} ( -sum_k pi_k ln(pi_k + eps_entropy) ).
// Subtracted from the CF loss (scaled by lambda_ent) to discourage
// mode collapse onto a single component.
inline double entropy_regularizer(const std::vector<std::vector<std::vector<double>>>& weight_vectors) {
    std::size_t count = 0;
    double total = 0.0;
    for (const auto& row : weight_vectors) {
        for (const auto& pis : row) {
            double h = 0.0;
            for (double pi : pis) h -= pi * std::log(pi + numeric::eps_entropy);
            total += h;
            ++count;
        }
    }
    if (count == 0) return 0.0;
    return total / static_cast<double>(count);
}

// Ancestral draw: component index from the categorical weights, then a CMS
// draw from that component.
inline double sample_mixture(const MixtureParams& mix, RngStream& rng) {
    const std::size_t k = sample_component(mix.weights, rng);
    return sample_stable(mix.components[k], rng);
}

}  // namespace levycast
