#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "levycast/rng.hpp"
#include "levycast/stable.hpp"

namespace levycast {

// Chambers-Mallows-Stuck draw from the S0 law `p`.
//
// The classical CMS transform yields an S1-parameterized variate. In the
// general branch the S1 standard law sits at location +zeta relative to the
// S0 standard law (zeta = beta tan(pi alpha / 2)), so Z is recentered by
// -zeta before the affine output map; without this the sampler and cf()
// disagree by exactly beta gamma tan(pi alpha / 2) for every skewed law.
// At alpha near 1 the Cauchy-like branch needs no recentering: its standard
// law already matches S0 at unit scale, and S0 is closed under gamma Z + delta.
inline double sample_stable(const StableParams& p, RngStream& rng) {
    const double half_pi = numeric::pi / 2.0;

    // V uniform on the open interval (-pi/2, pi/2); endpoints would put
    // cos(V) = 0 in a denominator. uniform() is open already; the rejection
    // loop is belt and braces against rounding at the interval ends.
    double V;
    do {
        V = rng.uniform_open(-half_pi, half_pi);
    } while (V <= -half_pi || V >= half_pi);

    // W ~ Exp(1), floored: a zero draw would enter a negative power.
    const double W = std::max(rng.exponential(), 1e-300);

    const double alpha = p.alpha;
    double Z;
    if (std::fabs(alpha - 1.0) > numeric::eps_alpha) {
        const double zeta = p.beta * std::tan(half_pi * alpha);
        const double xi = std::atan(zeta) / alpha;
        const double t = alpha * (V + xi);
        Z = std::pow(1.0 + zeta * zeta, 0.5 / alpha) * std::sin(t) /
                std::pow(std::cos(V), 1.0 / alpha) *
                std::pow(std::cos(V - t) / W, (1.0 - alpha) / alpha) -
            zeta;
    } else if (std::fabs(p.beta) < numeric::eps_beta_zero) {
        Z = std::tan(V);  // pure Cauchy
    } else {
        const double a = half_pi + p.beta * V;
        Z = (2.0 / numeric::pi) *
            (a * std::tan(V) - p.beta * std::log((half_pi * W * std::cos(V)) / a));
    }
    return p.gamma * Z + p.delta;
}

// Index k with probability weights[k]; weights on the simplex.
inline std::size_t sample_component(const std::vector<double>& weights, RngStream& rng) {
    if (weights.empty()) throw std::invalid_argument("empty weight vector");
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) return k;
    }
    return weights.size() - 1;
}

}  // namespace levycast
