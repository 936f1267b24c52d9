#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "levycast/rng.hpp"
#include "levycast/sampler.hpp"
#include "levycast/stable.hpp"

namespace levycast {

// Affine standardization: center and spread are fit on the training portion
// only and reused everywhere downstream, so test data never leaks into the
// normalization.
struct Scaler {
    double center = 0.0;
    double spread = 1.0;

    double apply(double x) const { return (x - center) / spread; }
    double invert(double z) const { return z * spread + center; }
};

// Fit (mean, population std) and standardize. Round trip is exact to
// floating-point cancellation (invert(apply(x)) = x within 1e-12 relative).
inline std::pair<std::vector<double>, Scaler> standardize(const std::vector<double>& series) {
    if (series.empty()) throw std::invalid_argument("cannot standardize an empty series");
    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(series.size());
    double var = 0.0;
    for (double x : series) var += (x - mean) * (x - mean);
    var /= static_cast<double>(series.size());
    const double sd = std::sqrt(var);
    // Relative floor: a constant series can leave var ~ 1e-31 from rounding
    // in the mean, and dividing by that manufactures huge fake z-scores.
    if (!(sd > 1e-12 * std::max(1.0, std::fabs(mean))))
        throw std::invalid_argument("zero spread: series is constant");
    Scaler sc{mean, sd};
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = sc.apply(series[i]);
    return {std::move(out), sc};
}

inline std::vector<double> standardize(const std::vector<double>& series, const Scaler& sc) {
    if (series.empty()) throw std::invalid_argument("cannot standardize an empty series");
    if (!(sc.spread > 0.0)) throw std::invalid_argument("zero spread in scaler");
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = sc.apply(series[i]);
    return out;
}

// One regime of a piecewise-constant generating schedule.
struct RegimeSegment {
    StableParams params;
    std::size_t length = 0;
};

// I.i.d. draws within each regime, regimes concatenated in order.
// Reproducible: the draw sequence is fully determined by the seed.
inline std::vector<double> generate_synthetic(const std::vector<RegimeSegment>& schedule,
                                              std::uint64_t seed) {
    std::size_t total = 0;
    for (const auto& seg : schedule) {
        if (!seg.params.valid()) throw std::invalid_argument("invalid stable parameters in schedule");
        total += seg.length;
    }
    if (total == 0) throw std::invalid_argument("empty schedule");
    RngStream rng(seed, 0xDA7A);
    std::vector<double> out;
    out.reserve(total);
    for (const auto& seg : schedule)
        for (std::size_t i = 0; i < seg.length; ++i) out.push_back(sample_stable(seg.params, rng));
    return out;
}

inline std::vector<double> generate_synthetic(const StableParams& params, std::size_t length,
                                              std::uint64_t seed) {
    return generate_synthetic(std::vector<RegimeSegment>{{params, length}}, seed);
}

// Hill tail-index estimator over the k largest magnitudes:
//   alpha_hat = [ (1/k) sum_{i=1..k} ln(X_(i) / X_(k+1)) ]^{-1}
// with X_(1) >= X_(2) >= ... the descending order statistics. Two-sided by
// default (|x|); one_sided restricts to positive observations. Zeros are
// dropped before ranking.
inline double hill_estimate(const std::vector<double>& series, std::size_t k,
                            bool one_sided = false) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    std::vector<double> mags;
    mags.reserve(series.size());
    for (double x : series) {
        const double m = one_sided ? x : std::fabs(x);
        if (m > 0.0) mags.push_back(m);
    }
    if (mags.size() < k + 1)
        throw std::invalid_argument("need at least k+1 positive-magnitude observations");
    std::partial_sort(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k + 1), mags.end(),
                      std::greater<double>());
    const double xk1 = mags[k];
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::log(mags[i] / xk1);
    s /= static_cast<double>(k);
    if (!(s > 0.0)) throw std::invalid_argument("degenerate tail: zero log spacings");
    return 1.0 / s;
}

// Default order-statistic count: ceil(N^0.6).
inline std::size_t hill_default_k(std::size_t n) {
    return static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 0.6)));
}

// Pearson kurtosis m4 / m2^2 (normal = 3).
inline double kurtosis(const std::vector<double>& series) {
    if (series.size() < 2) throw std::invalid_argument("kurtosis needs at least 2 points");
    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(series.size());
    double m2 = 0.0, m4 = 0.0;
    for (double x : series) {
        const double d = x - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(series.size());
    m4 /= static_cast<double>(series.size());
    const double floor = 1e-12 * std::max(1.0, std::fabs(mean));
    if (!(m2 > floor * floor)) throw std::invalid_argument("zero spread: series is constant");
    return m4 / (m2 * m2);
}

namespace detail {

// Asymptotic Kolmogorov survival function: P(sqrt(n) D > x) for large n.
inline double kolmogorov_pvalue(double d, std::size_t n) {
    const double x = std::sqrt(static_cast<double>(n)) * d;
    if (x < 1e-3) return 1.0;
    double p = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * x * x);
        p += (j % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::min(1.0, std::max(0.0, p));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

// KS statistic and asymptotic p-value of the series against a Gaussian
// fit by moments (mean, population std).
inline std::pair<double, double> ks_gaussian(const std::vector<double>& series) {
    if (series.size() < 2) throw std::invalid_argument("KS needs at least 2 points");
    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(series.size());
    double var = 0.0;
    for (double x : series) var += (x - mean) * (x - mean);
    var /= static_cast<double>(series.size());
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::fabs(mean))))
        throw std::invalid_argument("zero spread: series is constant");
    std::vector<double> sorted = series;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = detail::normal_cdf((sorted[i] - mean) / sd);
        const double lo = static_cast<double>(i) / static_cast<double>(n);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
        d = std::max(d, std::max(f - lo, hi - f));
    }
    return {d, detail::kolmogorov_pvalue(d, n)};
}

// Heavy-tail fingerprint of one contiguous segment.
struct TailDiagnostics {
    double hill_alpha = 0.0;
    double kurtosis = 0.0;
    double ks_gaussian_p = 0.0;
    std::size_t begin = 0;  // [begin, end) in the source series
    std::size_t end = 0;
};

inline TailDiagnostics tail_diagnostics(const std::vector<double>& series, std::size_t begin,
                                        std::size_t end) {
    if (end > series.size() || begin >= end) throw std::invalid_argument("bad segment bounds");
    if (end - begin < 50) throw std::invalid_argument("diagnostic window must be at least 50");
    const std::vector<double> seg(series.begin() + static_cast<std::ptrdiff_t>(begin),
                                  series.begin() + static_cast<std::ptrdiff_t>(end));
    TailDiagnostics d;
    d.begin = begin;
    d.end = end;
    d.hill_alpha = hill_estimate(seg, hill_default_k(seg.size()));
    d.kurtosis = levycast::kurtosis(seg);
    d.ks_gaussian_p = ks_gaussian(seg).second;
    return d;
}

inline TailDiagnostics tail_diagnostics(const std::vector<double>& series) {
    return tail_diagnostics(series, 0, series.size());
}

// Non-overlapping rolling segments of the given window length; a trailing
// remainder shorter than the window is dropped.
inline std::vector<TailDiagnostics> rolling_tail_diagnostics(const std::vector<double>& series,
                                                             std::size_t window) {
    if (window < 50) throw std::invalid_argument("diagnostic window must be at least 50");
    std::vector<TailDiagnostics> out;
    for (std::size_t b = 0; b + window <= series.size(); b += window)
        out.push_back(tail_diagnostics(series, b, b + window));
    if (out.empty()) throw std::invalid_argument("series shorter than one diagnostic window");
    return out;
}

// Volatility regime by local tail index: heavier tail = lower Hill index =
// more volatile regime.
enum class VolRegime { low, medium, high };

struct HillThresholds {
    double low_floor = 1.6;   // hill >= low_floor  -> low volatility
    double high_ceil = 1.2;   // hill <  high_ceil  -> high volatility
};

inline std::vector<VolRegime> bucket_by_hill(const std::vector<double>& series,
                                             std::size_t window,
                                             HillThresholds th = HillThresholds{}) {
    if (!(th.high_ceil < th.low_floor)) throw std::invalid_argument("thresholds out of order");
    std::vector<VolRegime> out;
    for (const auto& d : rolling_tail_diagnostics(series, window)) {
        if (d.hill_alpha >= th.low_floor) out.push_back(VolRegime::low);
        else if (d.hill_alpha < th.high_ceil) out.push_back(VolRegime::high);
        else out.push_back(VolRegime::medium);
    }
    return out;
}

// CSV ingestion: header row required, the value column selected by name.
// Any unparsable or blank value is a hard error; all offending lines are
// collected first and reported together with 1-based line numbers.
inline std::vector<double> ingest_csv(const std::string& path, const std::string& column,
                                      bool log_returns = false) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(s);
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            std::size_t b = 0;
            while (b < cell.size() && cell[b] == ' ') ++b;
            cells.push_back(cell.substr(b));
        }
        if (!s.empty() && s.back() == ',') cells.push_back("");
        return cells;
    };
    const auto header = split(line);
    std::size_t col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == column) col = i;
    if (col == header.size())
        throw std::runtime_error(path + ": no column named '" + column + "'");

    std::vector<double> values;
    std::string bad;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        const std::string& raw = col < cells.size() ? cells[col] : "";
        try {
            std::size_t used = 0;
            const double v = std::stod(raw, &used);
            if (used != raw.size() || !std::isfinite(v)) throw std::invalid_argument(raw);
            values.push_back(v);
        } catch (const std::exception&) {
            if (!bad.empty()) bad += ", ";
            bad += "line " + std::to_string(lineno) + " ('" + raw + "')";
        }
    }
    if (!bad.empty()) throw std::runtime_error(path + ": unparsable values at " + bad);
    if (values.empty()) throw std::runtime_error(path + ": no data rows");
    if (log_returns) {
        if (values.size() < 2) throw std::runtime_error(path + ": need 2+ prices for returns");
        std::vector<double> r(values.size() - 1);
        for (std::size_t i = 1; i < values.size(); ++i) {
            if (!(values[i] > 0.0) || !(values[i - 1] > 0.0))
                throw std::runtime_error(path + ": nonpositive price in log-return transform");
            r[i - 1] = std::log(values[i] / values[i - 1]);
        }
        return r;
    }
    return values;
}

// One training example: T standardized observations and the H subsequent
// standardized targets, adjacent and non-overlapping.
struct Window {
    std::vector<double> context;
    std::vector<double> targets;
};

enum class Split { train, val, test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

struct WindowedDataset {
    std::vector<Window> windows;
    std::vector<Split> splits;         // aligned with windows
    std::vector<std::size_t> starts;   // source index of each window's first context point
    std::vector<int> regimes;          // optional per-window regime label (-1 = unknown)
    Scaler scaler;                     // fit on the train segment of the raw series
    int T = 0;
    int H = 0;
    std::string source;

    std::vector<std::size_t> indices_of(Split s) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < splits.size(); ++i)
            if (splits[i] == s) idx.push_back(i);
        return idx;
    }
};

struct SplitFractions {
    double train = 0.70;
    double val = 0.15;  // remainder goes to test
};

// Chronological split happens before windowing: each window lives entirely
// inside one split segment, so no context or target crosses a boundary.
inline WindowedDataset make_windows(const std::vector<double>& series, int T, int H, int stride,
                                    SplitFractions fracs = SplitFractions{}) {
    if (T < 1 || H < 1 || stride < 1) throw std::invalid_argument("T, H, stride must be positive");
    const std::size_t need = static_cast<std::size_t>(T) + static_cast<std::size_t>(H);
    if (series.size() < need) throw std::invalid_argument("series shorter than one window");
    if (!(fracs.train >= 0.0 && fracs.val >= 0.0 && fracs.train + fracs.val <= 1.0 + 1e-12))
        throw std::invalid_argument("bad split fractions");

    const std::size_t n = series.size();
    const std::size_t n_train = static_cast<std::size_t>(fracs.train * static_cast<double>(n));
    const std::size_t n_val = static_cast<std::size_t>(fracs.val * static_cast<double>(n));
    const std::size_t bounds[4] = {0, n_train, n_train + n_val, n};

    const std::vector<double> train_part(series.begin(),
                                         series.begin() + static_cast<std::ptrdiff_t>(n_train ? n_train : n));
    const Scaler scaler = standardize(train_part).second;
    const auto z = standardize(series, scaler);

    WindowedDataset ds;
    ds.scaler = scaler;
    ds.T = T;
    ds.H = H;
    const Split kinds[3] = {Split::train, Split::val, Split::test};
    for (int s = 0; s < 3; ++s) {
        const std::size_t lo = bounds[s], hi = bounds[s + 1];
        for (std::size_t start = lo; start + need <= hi; start += static_cast<std::size_t>(stride)) {
            Window w;
            w.context.assign(z.begin() + static_cast<std::ptrdiff_t>(start),
                             z.begin() + static_cast<std::ptrdiff_t>(start + T));
            w.targets.assign(z.begin() + static_cast<std::ptrdiff_t>(start + T),
                             z.begin() + static_cast<std::ptrdiff_t>(start + need));
            ds.windows.push_back(std::move(w));
            ds.splits.push_back(kinds[s]);
            ds.starts.push_back(start);
            ds.regimes.push_back(-1);
        }
    }
    if (ds.windows.empty()) throw std::invalid_argument("no split segment can hold a full window");
    return ds;
}

}  // namespace levycast
