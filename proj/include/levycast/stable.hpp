#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

namespace levycast {

// Shared numerical constants. Values are load-bearing: tests pin behavior
// against them, so change them only together with the tests.
namespace numeric {
inline constexpr double alpha_min      = 0.1;    // lower stability bound
inline constexpr double alpha_max      = 1.95;   // upper stability bound
inline constexpr double alpha_range    = 1.85;   // alpha_max - alpha_min
inline constexpr double eps_beta_max   = 0.02;   // skewness margin: |beta| <= 1 - eps_beta_max
inline constexpr double eps_gamma      = 1e-4;   // scale floor
inline constexpr double eps_alpha      = 0.01;   // sampler branch switch half-width around alpha = 1
inline constexpr double eps_ln         = 1e-10;  // offset inside logarithms
inline constexpr double eps_tau        = 1e-12;  // frequencies below this are treated as tau = 0
inline constexpr double eps_w          = 1e-8;   // weight-normalization guard
inline constexpr double eps_entropy    = 1e-8;   // entropy log guard
inline constexpr double eps_beta_zero  = 1e-6;   // |beta| below this uses the pure-Cauchy shortcut
inline constexpr double log_cf_floor   = -50.0;  // clip on the real part of the log-CF
inline constexpr double tau_max        = 15.0;   // default frequency grid bound
inline constexpr double pi             = 3.14159265358979323846;
}  // namespace numeric

// One alpha-stable law in the S0 (Nolan) parameterization. S0 is the
// continuous parameterization: the law varies continuously in alpha through
// alpha = 1, which is what makes gradient-based fitting of alpha viable.
struct StableParams {
    double alpha;  // stability index, 0 < alpha <= 2
    double beta;   // skewness, -1 <= beta <= 1
    double gamma;  // scale, > 0
    double delta;  // location

    bool valid() const {
        return alpha > 0.0 && alpha <= 2.0 && beta >= -1.0 && beta <= 1.0 &&
               gamma > 0.0 && std::isfinite(delta);
    }
};

// Minimal complex carrier; the autodiff engine stays scalar-real, so CF
// values travel as explicit (re, im) pairs everywhere.
struct Complex {
    double re = 0.0;
    double im = 0.0;

    friend Complex operator+(Complex a, Complex b) { return {a.re + b.re, a.im + b.im}; }
    friend Complex operator-(Complex a, Complex b) { return {a.re - b.re, a.im - b.im}; }
    friend Complex operator*(double s, Complex a) { return {s * a.re, s * a.im}; }
    double abs() const { return std::hypot(re, im); }
    Complex conj() const { return {re, -im}; }
};

// Log-characteristic function psi(tau) = ln phi(tau), split into real and
// imaginary parts. The skew factor |gamma tau|^{1-alpha} - 1 is evaluated as
// expm1((1-alpha) ln(|gamma tau| + eps_ln)), which is finite and smooth for
// all alpha in (0, 2] except exactly alpha = 1, where the factor degenerates
// to 0 and the closed alpha = 1 form below must be used for skewed laws.
// The real part is clipped at -50: values there are ~e^-50 and carry no
// usable signal; the clip blocks gradients (zero in the clipped region).
inline std::pair<double, double> log_cf(const StableParams& p, double tau) {
    const double s = (tau > 0.0) - (tau < 0.0);
    const double u = std::fabs(p.gamma * tau);
    const double u_alpha = std::pow(u, p.alpha);
    const double psi_re = std::max(-u_alpha, numeric::log_cf_floor);
    const double g = std::expm1((1.0 - p.alpha) * std::log(u + numeric::eps_ln));
    const double skew = u_alpha * p.beta * s * std::tan(numeric::pi * p.alpha / 2.0) * g;
    const double psi_im = p.delta * tau - skew;
    return {psi_re, psi_im};
}

inline Complex cf_alpha1_closed(const StableParams& p, double tau);

// phi(tau) = exp(psi_re) (cos psi_im + i sin psi_im); exactly 1 at tau = 0.
// |phi| <= 1 always since psi_re <= 0. The expm1-based branch is used for
// every alpha by default; use_alpha1_closed opts into the closed alpha = 1
// form within eps_alpha of 1 (required for skewed laws at exactly alpha = 1).
inline Complex cf(const StableParams& p, double tau, bool use_alpha1_closed = false) {
    if (std::fabs(tau) < numeric::eps_tau) return {1.0, 0.0};
    if (use_alpha1_closed && std::fabs(p.alpha - 1.0) <= numeric::eps_alpha) {
        return cf_alpha1_closed(p, tau);
    }
    auto [psi_re, psi_im] = log_cf(p, tau);
    const double m = std::exp(psi_re);
    return {m * std::cos(psi_im), m * std::sin(psi_im)};
}

// Closed form at alpha = 1:
//   phi(tau) = exp(-|gamma tau| (1 + i beta sgn(tau) (2/pi) ln|gamma tau|) + i delta tau).
// Exact at alpha = 1 for every beta; the general branch above is only valid
// arbitrarily close to (not at) alpha = 1 when beta != 0.
inline Complex cf_alpha1_closed(const StableParams& p, double tau) {
    if (std::fabs(tau) < numeric::eps_tau) return {1.0, 0.0};
    const double s = (tau > 0.0) - (tau < 0.0);
    const double u = std::fabs(p.gamma * tau);
    const double psi_re = std::max(-u, numeric::log_cf_floor);
    const double psi_im =
        p.delta * tau - u * p.beta * s * (2.0 / numeric::pi) * std::log(u + numeric::eps_ln);
    const double m = std::exp(psi_re);
    return {m * std::cos(psi_im), m * std::sin(psi_im)};
}

}  // namespace levycast
