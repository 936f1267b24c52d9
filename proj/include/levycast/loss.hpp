#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "levycast/autodiff.hpp"
#include "levycast/grid.hpp"
#include "levycast/mixture.hpp"
#include "levycast/network.hpp"

namespace levycast {

// Handles to the scalar training objective and its pieces.
struct LossRefs {
    ad::Tape::Ref total = -1;     // minimized by the optimizer
    ad::Tape::Ref spectral = -1;  // CF discrepancy or NLL, sum over horizons, mean over batch
    ad::Tape::Ref entropy = -1;   // mean mixing entropy (-1 for single-law heads)
};

namespace detail {

// Frequencies participating in the loss. Masked-out points (|tau| below the
// zero guard) are dropped from the tensors entirely rather than zeroed:
// both sums in the loss run over the same masked-in set, so this is exact,
// and it keeps |gamma tau| strictly positive everywhere powv is evaluated.
struct IncludedGrid {
    std::vector<double> tau;
    std::vector<double> abs_tau;
    std::vector<double> sgn_tau;
};

inline IncludedGrid included_grid(const FrequencyGrid& grid) {
    IncludedGrid g;
    for (std::size_t m = 0; m < grid.size(); ++m) {
        if (!grid.include_mask[m]) continue;
        const double tau = grid.points[m];
        g.tau.push_back(tau);
        g.abs_tau.push_back(std::fabs(tau));
        g.sgn_tau.push_back(tau > 0.0 ? 1.0 : (tau < 0.0 ? -1.0 : 0.0));
    }
    if (g.tau.empty()) throw std::invalid_argument("no usable frequencies on the grid");
    return g;
}

}  // namespace detail

// Autodiff mirror of cf_loss() plus the entropy regularizer, built on one
// tape from per-horizon head outputs. targets is the realized (B, H) panel.
//
// The frequency weights enter as constants: they are recomputed from the
// current head values each call, but the weighting itself is not a gradient
// path. This matches treating the effective scale and stability as frozen
// inside the weight formula. weight_anchor, when given as a (B, H) panel of
// mixtures, pins the weights to those parameters instead of the current head
// values; finite-difference checks use it to probe the objective the
// gradient actually differentiates.
inline LossRefs build_spectral_loss(ad::Tape& t, const ModelConfig& cfg,
                                    const FrequencyGrid& grid,
                                    const std::vector<HeadRefs>& horizons,
                                    const ad::Tensor& targets,
                                    bool uniform_weights = false,
                                    const std::vector<std::vector<MixtureParams>>* weight_anchor =
                                        nullptr) {
    const int H = static_cast<int>(horizons.size());
    if (H == 0) throw std::invalid_argument("no horizons");
    if (targets.cols != H) throw std::invalid_argument("target panel does not match horizons");
    const int B = targets.rows;
    const int K = t.val(horizons[0].pi).cols;
    if (weight_anchor &&
        (weight_anchor->size() != static_cast<std::size_t>(B) ||
         weight_anchor->front().size() != static_cast<std::size_t>(H)))
        throw std::invalid_argument("weight anchor does not match the batch panel");

    const auto inc = detail::included_grid(grid);
    const int M = static_cast<int>(inc.tau.size());
    const auto tau_row = t.input(1, M, inc.tau);
    const auto abs_tau_row = t.input(1, M, inc.abs_tau);
    const auto sgn_tau_row = t.input(1, M, inc.sgn_tau);

    ad::Tape::Ref spectral_acc = -1;
    ad::Tape::Ref entropy_acc = -1;

    for (int h = 0; h < H; ++h) {
        const HeadRefs& refs = horizons[h];

        // Per-sample weights and their normalizers, from current values.
        ad::Tensor w_val(B, M, 1.0);
        ad::Tensor den_val(B, 1, static_cast<double>(M) + numeric::eps_w);
        if (!uniform_weights) {
            for (int b = 0; b < B; ++b) {
                const auto eff = effective_params(
                    weight_anchor ? (*weight_anchor)[static_cast<std::size_t>(b)]
                                                    [static_cast<std::size_t>(h)]
                                  : mixture_from_refs(t, refs, b));
                double den = 0.0;
                for (int m = 0; m < M; ++m) {
                    const double w =
                        std::exp(-std::pow(eff.gamma_eff * inc.abs_tau[m], eff.alpha_eff));
                    w_val.at(b, m) = w;
                    den += w;
                }
                den_val.at(b, 0) = den + numeric::eps_w;
            }
        }
        const auto w_const = t.input(w_val);
        const auto den_const = t.input(den_val);

        // Unit-modulus empirical term e^{i tau y}, constant w.r.t. parameters.
        ad::Tensor ec(B, M), es(B, M);
        for (int b = 0; b < B; ++b) {
            const double y = targets.at(b, h);
            for (int m = 0; m < M; ++m) {
                ec.at(b, m) = std::cos(inc.tau[m] * y);
                es.at(b, m) = std::sin(inc.tau[m] * y);
            }
        }
        const auto ecf_re = t.input(ec);
        const auto ecf_im = t.input(es);

        // Predicted mixture CF, component by component.
        ad::Tape::Ref phi_re = -1;
        ad::Tape::Ref phi_im = -1;
        for (int k = 0; k < K; ++k) {
            const auto pi_k = t.slice_cols(refs.pi, k, k + 1);
            const auto alpha_k = t.slice_cols(refs.alpha, k, k + 1);
            const auto beta_k = t.slice_cols(refs.beta, k, k + 1);
            const auto gamma_k = t.slice_cols(refs.gamma, k, k + 1);
            const auto delta_k = t.slice_cols(refs.delta, k, k + 1);

            const auto u = t.mul(gamma_k, abs_tau_row);  // gamma > 0, so u = |gamma tau|
            const auto u_alpha = t.powv(u, alpha_k);
            const auto psi_re = t.clip_min(t.neg(u_alpha), numeric::log_cf_floor);
            const auto lnu = t.log_(t.add_const(u, numeric::eps_ln));
            const auto g = t.expm1_(t.mul(t.add_const(t.neg(alpha_k), 1.0), lnu));
            const auto half_pi_alpha = t.scale(alpha_k, numeric::pi / 2.0);
            const auto tan_term = t.div(t.sin_(half_pi_alpha), t.cos_(half_pi_alpha));
            const auto skew =
                t.mul(t.mul(t.mul(u_alpha, beta_k), sgn_tau_row), t.mul(tan_term, g));
            const auto psi_im = t.sub(t.mul(delta_k, tau_row), skew);

            const auto mod = t.exp_(psi_re);
            const auto re_k = t.mul(pi_k, t.mul(mod, t.cos_(psi_im)));
            const auto im_k = t.mul(pi_k, t.mul(mod, t.sin_(psi_im)));
            phi_re = (phi_re < 0) ? re_k : t.add(phi_re, re_k);
            phi_im = (phi_im < 0) ? im_k : t.add(phi_im, im_k);
        }

        const auto dr = t.sub(phi_re, ecf_re);
        const auto di = t.sub(phi_im, ecf_im);
        const auto sq = t.add(t.pow_const(dr, 2.0), t.pow_const(di, 2.0));
        const auto num = t.sum_cols(t.mul(w_const, sq));
        const auto term = t.sum_all(t.div(num, den_const));
        spectral_acc = (spectral_acc < 0) ? term : t.add(spectral_acc, term);

        const auto ent_h =
            t.neg(t.sum_all(t.mul(refs.pi, t.log_(t.add_const(refs.pi, numeric::eps_entropy)))));
        entropy_acc = (entropy_acc < 0) ? ent_h : t.add(entropy_acc, ent_h);
    }

    LossRefs out;
    out.spectral = t.scale(spectral_acc, 1.0 / static_cast<double>(B));
    out.entropy = t.scale(entropy_acc, 1.0 / static_cast<double>(B * H));
    out.total = t.sub(out.spectral, t.scale(out.entropy, cfg.lambda_ent));
    return out;
}

namespace detail {

// log of the standardized Student-t density at z with dof nu, on the tape.
// Shapes broadcast; nu must be > 0 (head guarantees > 2).
inline ad::Tape::Ref log_student_t(ad::Tape& t, ad::Tape::Ref z, ad::Tape::Ref nu) {
    const auto half_nu1 = t.scale(t.add_const(nu, 1.0), 0.5);
    const auto half_nu = t.scale(nu, 0.5);
    const auto quad = t.log_(t.add_const(t.div(t.pow_const(z, 2.0), nu), 1.0));
    auto out = t.sub(t.lgamma_(half_nu1), t.lgamma_(half_nu));
    out = t.sub(out, t.scale(t.log_(t.scale(nu, numeric::pi)), 0.5));
    return t.sub(out, t.mul(half_nu1, quad));
}

}  // namespace detail

// Exact negative log-likelihood objective for the reference heads, with the
// same reduction as the spectral loss: sum over horizons, mean over batch.
inline LossRefs build_nll_loss(ad::Tape& t, const ModelConfig& cfg,
                               const std::vector<HeadRefs>& horizons,
                               const ad::Tensor& targets) {
    const int H = static_cast<int>(horizons.size());
    if (H == 0) throw std::invalid_argument("no horizons");
    if (targets.cols != H) throw std::invalid_argument("target panel does not match horizons");
    const int B = targets.rows;
    const double log_2pi = std::log(2.0 * numeric::pi);

    ad::Tape::Ref acc = -1;
    for (int h = 0; h < H; ++h) {
        const HeadRefs& refs = horizons[h];
        ad::Tensor ycol(B, 1);
        for (int b = 0; b < B; ++b) ycol.at(b, 0) = targets.at(b, h);
        const auto y = t.input(ycol);

        const auto mu = refs.delta;
        const auto sigma = refs.gamma;
        const auto z = t.div(t.sub(y, mu), sigma);  // (B, K) by broadcast

        ad::Tape::Ref logf = -1;
        switch (cfg.head_kind) {
            case HeadKind::gaussian:
            case HeadKind::gaussian_mixture: {
                logf = t.neg(t.add(t.add_const(t.scale(t.pow_const(z, 2.0), 0.5), 0.5 * log_2pi),
                                   t.log_(sigma)));
                break;
            }
            case HeadKind::student_t:
            case HeadKind::student_t_mixture: {
                logf = t.sub(detail::log_student_t(t, z, refs.dof), t.log_(sigma));
                break;
            }
            case HeadKind::asym_student_t: {
                // Two-piece skewing of the Student-t: the positive half is
                // stretched by xi, the negative half compressed by it.
                const auto lam = refs.skew;  // in (-1, 1)
                const auto xi = t.exp_(t.scale(
                    t.sub(t.log_(t.add_const(lam, 1.0)), t.log_(t.add_const(t.neg(lam), 1.0))),
                    0.5));
                const auto inv_xi = t.pow_const(xi, -1.0);
                const auto& zv = t.val(z);
                ad::Tensor mask(zv.rows, zv.cols);
                for (std::size_t i = 0; i < zv.size(); ++i)
                    mask.v[i] = zv.v[i] >= 0.0 ? 1.0 : 0.0;
                const auto mpos = t.input(mask);
                const auto mneg = t.input(
                    ad::Tensor(zv.rows, zv.cols, [&] {
                        std::vector<double> inv(zv.size());
                        for (std::size_t i = 0; i < zv.size(); ++i) inv[i] = 1.0 - mask.v[i];
                        return inv;
                    }()));
                const auto arg = t.mul(z, t.add(t.mul(mpos, inv_xi), t.mul(mneg, xi)));
                auto lf = detail::log_student_t(t, arg, refs.dof);
                lf = t.add_const(lf, std::log(2.0));
                lf = t.sub(lf, t.log_(t.add(xi, inv_xi)));
                logf = t.sub(lf, t.log_(sigma));
                break;
            }
            case HeadKind::levy_mixture:
                throw std::invalid_argument("spectral head has no closed-form likelihood");
        }

        // Mixture log-likelihood via logsumexp over components; exact for
        // K = 1 since log pi = 0 there.
        const auto lx = t.add(logf, t.log_(refs.pi));
        const auto m = t.rowmax_nograd(lx);
        const auto lse = t.add(t.log_(t.sum_cols(t.exp_(t.sub(lx, m)))), m);
        const auto nll_h = t.neg(t.sum_all(lse));
        acc = (acc < 0) ? nll_h : t.add(acc, nll_h);
    }

    LossRefs out;
    out.spectral = t.scale(acc, 1.0 / static_cast<double>(B));
    out.total = out.spectral;
    return out;
}

}  // namespace levycast
