#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "levycast/autodiff.hpp"

namespace levycast {

// Learning rate at `step` of `total_steps` under cosine annealing:
// eta at step 0, decaying to eta * floor_frac at the final step.
inline double cosine_lr(double eta, long step, long total_steps, double floor_frac = 1e-3) {
    if (total_steps <= 1) return eta;
    const double floor = eta * floor_frac;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return floor + 0.5 * (eta - floor) * (1.0 + std::cos(3.14159265358979323846 * t));
}

// Adaptive-moment optimizer with global-norm gradient clipping. The clip is
// applied jointly across every parameter tensor (a single g in the update
// rule): g <- g / max(1, ||g||_2), then the standard biased-corrected
// moment update with the supplied learning rate.
class Adam {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    // Returns the pre-clip global gradient norm (logged per epoch).
    double clip_and_step(std::vector<ad::Tensor*>& params,
                         const std::vector<const ad::Tensor*>& grads, double eta) {
        if (eta <= 0.0) throw std::invalid_argument("learning rate must be positive");
        if (params.size() != grads.size()) throw std::invalid_argument("param/grad count mismatch");
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (std::size_t p = 0; p < params.size(); ++p) {
                m_[p].assign(params[p]->size(), 0.0);
                v_[p].assign(params[p]->size(), 0.0);
            }
        }
        double sq = 0.0;
        for (auto* g : grads)
            for (double x : g->v) sq += x * x;
        const double norm = std::sqrt(sq);
        const double scale = 1.0 / std::max(1.0, norm);

        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t p = 0; p < params.size(); ++p) {
            auto& pv = params[p]->v;
            const auto& gv = grads[p]->v;
            auto& m = m_[p];
            auto& v = v_[p];
            for (std::size_t i = 0; i < pv.size(); ++i) {
                const double g = gv[i] * scale;
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                pv[i] -= eta * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
            }
        }
        return norm;
    }

    long step_count() const { return t_; }

private:
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long t_ = 0;
};

}  // namespace levycast
