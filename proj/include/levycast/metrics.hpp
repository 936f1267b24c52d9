#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "levycast/rng.hpp"

namespace levycast {

namespace detail {
inline std::vector<double> sorted_copy(const std::vector<double>& v) {
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    return s;
}
}  // namespace detail

// Empirical quantile, inverted-CDF (type-1) convention: the smallest sample
// x with F(x) >= level, i.e. the ceil(level * N)-th order statistic.
inline double empirical_quantile(const std::vector<double>& sorted_samples, double level) {
    if (sorted_samples.empty()) throw std::invalid_argument("empty sample");
    if (!(level > 0.0 && level <= 1.0)) throw std::invalid_argument("level must be in (0, 1]");
    const std::size_t n = sorted_samples.size();
    std::size_t r = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
    if (r < 1) r = 1;
    if (r > n) r = n;
    return sorted_samples[r - 1];
}

// CRPS of an N-sample ensemble against realization y, energy form:
//   mean_i |X_i - y| - (1/2) mean_{i,j} |X_i - X_j|
// over all N^2 pairs. Computed in O(N log N) via order statistics.
inline double crps_ensemble(const std::vector<double>& samples, double y) {
    if (samples.empty()) throw std::invalid_argument("empty sample");
    const auto s = detail::sorted_copy(samples);
    const double n = static_cast<double>(s.size());
    double abs_err = 0.0;
    for (double x : s) abs_err += std::fabs(x - y);
    abs_err /= n;
    // sum over ordered pairs |X_i - X_j| = 2 * sum_j (2j - 1 - N) x_(j), j 1-based
    double spread = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j)
        spread += (2.0 * static_cast<double>(j + 1) - 1.0 - n) * s[j];
    spread = 2.0 * spread / (n * n);
    return abs_err - 0.5 * spread;
}

// Exact integral of (F_hat(x) - 1{y <= x})^2 over (lo, hi), where F_hat is
// the empirical step CDF of the samples. Both step functions are piecewise
// constant between breakpoints, so the integral is a finite sum; the
// integrand vanishes outside [min(samples, y), max(samples, y)].
// Unrestricted (lo = -inf, hi = +inf) this is the integral form of the CRPS
// and agrees with crps_ensemble to rounding.
inline double crps_step_integral(const std::vector<double>& samples, double y,
                                 double lo = -std::numeric_limits<double>::infinity(),
                                 double hi = std::numeric_limits<double>::infinity()) {
    if (samples.empty()) throw std::invalid_argument("empty sample");
    const auto s = detail::sorted_copy(samples);
    std::vector<double> pts = s;
    pts.push_back(y);
    std::sort(pts.begin(), pts.end());
    const double n = static_cast<double>(s.size());
    double total = 0.0;
    std::size_t si = 0;  // samples at or below the current left breakpoint
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        while (si < s.size() && s[si] <= pts[i]) ++si;
        const double a = std::max(pts[i], lo);
        const double b = std::min(pts[i + 1], hi);
        if (b <= a) continue;
        const double d = static_cast<double>(si) / n - (y <= pts[i] ? 1.0 : 0.0);
        total += d * d * (b - a);
    }
    return total;
}

// Tail-restricted CRPS: the same exact integral, restricted to the regions
// below the forecast's own 10th and above its 90th empirical percentile.
// Forecast-dependent integration limits make this diagnostic rather than
// strictly proper; it isolates tail calibration.
inline double tail_crps(const std::vector<double>& samples, double y) {
    if (samples.size() < 10)
        throw std::invalid_argument("tail percentiles need at least 10 samples");
    const auto s = detail::sorted_copy(samples);
    const double q10 = empirical_quantile(s, 0.10);
    const double q90 = empirical_quantile(s, 0.90);
    return crps_step_integral(samples, y, -std::numeric_limits<double>::infinity(), q10) +
           crps_step_integral(samples, y, q90, std::numeric_limits<double>::infinity());
}

// Pinball loss rho_tau(y - q_tau) averaged over the requested levels, with
// empirical sample quantiles as the predictions.
inline double quantile_loss(const std::vector<double>& samples, double y,
                            const std::vector<double>& levels = {0.1, 0.5, 0.9, 0.99}) {
    if (samples.empty()) throw std::invalid_argument("empty sample");
    if (levels.empty()) throw std::invalid_argument("no levels");
    const auto s = detail::sorted_copy(samples);
    double total = 0.0;
    for (double tau : levels) {
        const double q = empirical_quantile(s, tau);
        const double u = y - q;
        total += u >= 0.0 ? tau * u : (tau - 1.0) * u;
    }
    return total / static_cast<double>(levels.size());
}

// Fraction of cases whose realization falls at or below the forecast's
// level-quantile, and its absolute deviation from the nominal level.
inline std::pair<double, double> coverage(const std::vector<std::vector<double>>& samples_per_case,
                                          const std::vector<double>& ys, double level) {
    if (samples_per_case.empty() || samples_per_case.size() != ys.size())
        throw std::invalid_argument("coverage inputs misaligned");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const auto s = detail::sorted_copy(samples_per_case[i]);
        if (ys[i] <= empirical_quantile(s, level)) ++hit;
    }
    const double value = static_cast<double>(hit) / static_cast<double>(ys.size());
    return {value, std::fabs(value - level)};
}

// KS statistic of the values against Uniform(0, 1).
inline double ks_uniform(std::vector<double> pits) {
    if (pits.empty()) throw std::invalid_argument("no PIT values");
    std::sort(pits.begin(), pits.end());
    const double n = static_cast<double>(pits.size());
    double d = 0.0;
    for (std::size_t i = 0; i < pits.size(); ++i) {
        d = std::max(d, (static_cast<double>(i + 1)) / n - pits[i]);
        d = std::max(d, pits[i] - static_cast<double>(i) / n);
    }
    return d;
}

// Randomized PIT of y within an N-sample ensemble:
//   (#{X < y} + U * (1 + #{X = y})) / (N + 1),  U ~ Uniform(0, 1).
// Randomizing across the [left, right] block de-discretizes the rank: under
// a correctly specified forecast (y exchangeable with the samples) the
// result is exactly Uniform(0, 1), which is what the KS test below assumes.
inline double randomized_pit(const std::vector<double>& samples, double y, RngStream& rng) {
    if (samples.empty()) throw std::invalid_argument("empty sample");
    std::size_t less = 0, equal = 0;
    for (double x : samples) {
        if (x < y) ++less;
        else if (x == y) ++equal;
    }
    return (static_cast<double>(less) + rng.uniform() * (1.0 + static_cast<double>(equal))) /
           (static_cast<double>(samples.size()) + 1.0);
}

// KS statistic of the randomized PITs against Uniform(0, 1). The only
// stochastic metric: tie/rank randomization draws from the supplied stream.
inline double pit_ks(const std::vector<std::vector<double>>& samples_per_case,
                     const std::vector<double>& ys, RngStream& rng) {
    if (samples_per_case.empty() || samples_per_case.size() != ys.size())
        throw std::invalid_argument("PIT inputs misaligned");
    std::vector<double> pits(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i)
        pits[i] = randomized_pit(samples_per_case[i], ys[i], rng);
    return ks_uniform(pits);
}

// ---- report assembly ----

// One evaluation case: an H x N forecast sample matrix and the H realized
// values, both in original data units.
struct EvalCase {
    std::vector<std::vector<double>> samples;  // H rows, N columns
    std::vector<double> truths;                // H values
};

struct HorizonMetrics {
    double crps = 0.0;
    double tail_crps = 0.0;
    double ql = 0.0;
    double pit_ks = 0.0;
    std::vector<std::pair<double, double>> coverage;  // (value, abs deviation) per level
    std::size_t count = 0;
};

struct MetricReport {
    std::vector<double> coverage_levels;
    std::vector<double> ql_levels;
    std::vector<HorizonMetrics> per_horizon;
    HorizonMetrics aggregate;  // pooled over every (case, horizon) pair
};

namespace detail {
inline HorizonMetrics score_pool(const std::vector<std::vector<double>>& samples,
                                 const std::vector<double>& ys,
                                 const std::vector<double>& cov_levels,
                                 const std::vector<double>& ql_levels, RngStream& rng) {
    HorizonMetrics m;
    m.count = ys.size();
    for (std::size_t i = 0; i < ys.size(); ++i) {
        m.crps += crps_ensemble(samples[i], ys[i]);
        m.tail_crps += levycast::tail_crps(samples[i], ys[i]);
        m.ql += quantile_loss(samples[i], ys[i], ql_levels);
    }
    const double n = static_cast<double>(ys.size());
    m.crps /= n;
    m.tail_crps /= n;
    m.ql /= n;
    for (double level : cov_levels) m.coverage.push_back(coverage(samples, ys, level));
    m.pit_ks = pit_ks(samples, ys, rng);
    return m;
}
}  // namespace detail

inline MetricReport assemble_report(const std::vector<EvalCase>& cases, RngStream& rng,
                                    std::vector<double> coverage_levels = {0.75, 0.90, 0.995},
                                    std::vector<double> ql_levels = {0.1, 0.5, 0.9, 0.99}) {
    if (cases.empty()) throw std::invalid_argument("empty test set");
    const std::size_t H = cases[0].truths.size();
    if (H == 0) throw std::invalid_argument("no horizons");
    for (const auto& c : cases)
        if (c.truths.size() != H || c.samples.size() != H)
            throw std::invalid_argument("forecasts and truths misaligned");

    MetricReport rep;
    rep.coverage_levels = coverage_levels;
    rep.ql_levels = ql_levels;
    std::vector<std::vector<double>> pool_samples;
    std::vector<double> pool_ys;
    for (std::size_t h = 0; h < H; ++h) {
        std::vector<std::vector<double>> s;
        std::vector<double> ys;
        for (const auto& c : cases) {
            s.push_back(c.samples[h]);
            ys.push_back(c.truths[h]);
            pool_samples.push_back(c.samples[h]);
            pool_ys.push_back(c.truths[h]);
        }
        rep.per_horizon.push_back(detail::score_pool(s, ys, coverage_levels, ql_levels, rng));
    }
    rep.aggregate = detail::score_pool(pool_samples, pool_ys, coverage_levels, ql_levels, rng);
    return rep;
}

// Nominal-vs-empirical coverage curve pooled over horizons, for calibration
// plots: levels 0.05 to 0.95 in steps of 0.05, then 0.975, 0.99, 0.995.
inline std::vector<std::pair<double, double>> coverage_curve(const std::vector<EvalCase>& cases) {
    if (cases.empty()) throw std::invalid_argument("empty test set");
    std::vector<std::vector<double>> samples;
    std::vector<double> ys;
    for (const auto& c : cases)
        for (std::size_t h = 0; h < c.truths.size(); ++h) {
            samples.push_back(c.samples[h]);
            ys.push_back(c.truths[h]);
        }
    std::vector<double> levels;
    for (int i = 1; i <= 19; ++i) levels.push_back(0.05 * i);
    levels.insert(levels.end(), {0.975, 0.99, 0.995});
    std::vector<std::pair<double, double>> curve;
    for (double lv : levels) curve.emplace_back(lv, coverage(samples, ys, lv).first);
    return curve;
}

inline std::vector<std::size_t> pit_histogram(const std::vector<EvalCase>& cases, RngStream& rng,
                                              std::size_t bins = 20) {
    if (cases.empty()) throw std::invalid_argument("empty test set");
    if (bins < 1) throw std::invalid_argument("need at least one bin");
    std::vector<std::size_t> counts(bins, 0);
    for (const auto& c : cases)
        for (std::size_t h = 0; h < c.truths.size(); ++h) {
            const double p = randomized_pit(c.samples[h], c.truths[h], rng);
            std::size_t b = static_cast<std::size_t>(p * static_cast<double>(bins));
            if (b >= bins) b = bins - 1;
            ++counts[b];
        }
    return counts;
}

// ---- text artifacts ----

inline std::string report_table_header(const MetricReport& rep) {
    std::ostringstream os;
    os << "model            horizon   CRPS      Tail-CRPS  QL       ";
    for (double lv : rep.coverage_levels) {
        os << " Cov@" << lv;
        os << std::string(lv < 0.9949 ? 9 : 8, ' ');
    }
    os << "PIT-KS\n";
    return os.str();
}

inline std::string report_table_rows(const std::string& label, const MetricReport& rep) {
    std::ostringstream os;
    auto line = [&](const std::string& hz, const HorizonMetrics& m) {
        char buf[64];
        os << label << std::string(label.size() < 17 ? 17 - label.size() : 1, ' ');
        os << hz << std::string(hz.size() < 10 ? 10 - hz.size() : 1, ' ');
        std::snprintf(buf, sizeof buf, "%-9.4f %-10.4f %-9.4f", m.crps, m.tail_crps, m.ql);
        os << buf;
        for (const auto& [value, dev] : m.coverage) {
            std::snprintf(buf, sizeof buf, " %.3f (%.3f) ", value, dev);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.4f\n", m.pit_ks);
        os << buf;
    };
    for (std::size_t h = 0; h < rep.per_horizon.size(); ++h)
        line(std::to_string(h + 1), rep.per_horizon[h]);
    line("all", rep.aggregate);
    return os.str();
}

// Machine-readable rows: dataset,model,horizon,metric,value (no header).
inline std::string report_csv_rows(const std::string& dataset, const std::string& model,
                                   const MetricReport& rep) {
    std::ostringstream os;
    auto emit = [&](const std::string& hz, const HorizonMetrics& m) {
        os << dataset << ',' << model << ',' << hz << ",crps," << m.crps << '\n';
        os << dataset << ',' << model << ',' << hz << ",tail_crps," << m.tail_crps << '\n';
        os << dataset << ',' << model << ',' << hz << ",ql," << m.ql << '\n';
        for (std::size_t i = 0; i < m.coverage.size(); ++i) {
            os << dataset << ',' << model << ',' << hz << ",coverage@" << rep.coverage_levels[i]
               << ',' << m.coverage[i].first << '\n';
            os << dataset << ',' << model << ',' << hz << ",coverage_dev@"
               << rep.coverage_levels[i] << ',' << m.coverage[i].second << '\n';
        }
        os << dataset << ',' << model << ',' << hz << ",pit_ks," << m.pit_ks << '\n';
    };
    for (std::size_t h = 0; h < rep.per_horizon.size(); ++h)
        emit(std::to_string(h + 1), rep.per_horizon[h]);
    emit("all", rep.aggregate);
    return os.str();
}

}  // namespace levycast
