#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"

namespace symdyn {

/// A single uniformly sampled scalar channel.
struct raw_series {
    std::vector<double> samples;
    std::optional<double> sample_rate_hz; ///< carried for provenance only
};

/// Result of phase-preserving decimation: segment i holds samples
/// i, i+lag, i+2*lag, ... of the source. Segments are modeled independently
/// and never concatenated for window counting.
struct segmented_series {
    std::vector<std::vector<double>> segments;
    std::size_t lag = 1;

    [[nodiscard]] std::size_t total_samples() const noexcept {
        std::size_t n = 0;
        for (const auto& s : segments) n += s.size();
        return n;
    }
};

/// How the downsampling lag was chosen; surfaced in fit diagnostics.
enum class lag_rule { local_minimum, zero_crossing, max_lag_fallback };

struct lag_estimate {
    std::size_t lag = 1;
    lag_rule rule = lag_rule::local_minimum;
    /// True only for the max-lag fallback, where no decorrelation point was
    /// found and the caller should treat the lag as a guess.
    bool warning = false;
};

inline double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

/// Population (divide-by-N) variance.
inline double variance(std::span<const double> x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

/// Center to zero mean and scale to unit population variance.
/// Applying it twice changes nothing beyond rounding: the second pass sees
/// mean 0 and variance 1.
inline raw_series normalize(const raw_series& in) {
    if (in.samples.empty())
        throw error(errc::invalid_argument, "normalize: empty series");
    const double m = mean(in.samples);
    const double sd = std::sqrt(variance(in.samples));
    if (sd == 0.0)
        throw zero_variance_error("normalize: series is constant");
    raw_series out;
    out.sample_rate_hz = in.sample_rate_hz;
    out.samples.reserve(in.samples.size());
    for (double v : in.samples) out.samples.push_back((v - m) / sd);
    return out;
}

/// Biased (divide-by-N) autocorrelation of the mean-centered series, so that
/// acf[0] == 1. The biased form tapers with lag, which keeps the lag-picking
/// heuristic below stable on short records.
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
    if (x.empty())
        throw error(errc::invalid_argument, "autocorrelation: empty series");
    if (max_lag >= x.size())
        throw lag_too_large_error("autocorrelation: max_lag must be smaller than the series length");
    const double m = mean(x);
    const std::size_t n = x.size();
    std::vector<double> c(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double s = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) s += (x[t] - m) * (x[t + k] - m);
        c[k] = s / static_cast<double>(n);
    }
    if (c[0] == 0.0)
        throw zero_variance_error("autocorrelation: series is constant");
    std::vector<double> r(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) r[k] = c[k] / c[0];
    return r;
}

/// Pick the decimation stride from the autocorrelation: the first local
/// minimum (strict drop followed by no further drop). Falls back to the first
/// non-positive value, then to the largest available lag with a warning.
inline lag_estimate find_downsampling_lag(std::span<const double> acf) {
    if (acf.size() < 2)
        throw error(errc::invalid_argument, "find_downsampling_lag: need at least lags 0 and 1");
    for (std::size_t k = 1; k + 1 < acf.size(); ++k) {
        if (acf[k] < acf[k - 1] && acf[k] <= acf[k + 1])
            return {k, lag_rule::local_minimum, false};
    }
    for (std::size_t k = 1; k < acf.size(); ++k) {
        if (acf[k] <= 0.0)
            return {k, lag_rule::zero_crossing, false};
    }
    return {acf.size() - 1, lag_rule::max_lag_fallback, true};
}

/// Default autocorrelation horizon for lag selection.
inline std::size_t default_max_lag(std::size_t n) {
    const std::size_t quarter = n / 4;
    return std::clamp<std::size_t>(std::min<std::size_t>(1000, quarter), 1, n > 1 ? n - 1 : 1);
}

/// Split into `lag` phase-shifted subsequences instead of discarding samples.
/// Segment boundaries stay visible downstream so no window ever straddles
/// two phases.
inline segmented_series downsample_all_phases(const raw_series& in, std::size_t lag) {
    if (lag == 0)
        throw error(errc::invalid_argument, "downsample_all_phases: lag must be positive");
    if (in.samples.empty())
        throw error(errc::invalid_argument, "downsample_all_phases: empty series");
    segmented_series out;
    out.lag = lag;
    out.segments.resize(lag);
    for (std::size_t phase = 0; phase < lag; ++phase) {
        auto& seg = out.segments[phase];
        seg.reserve(in.samples.size() / lag + 1);
        for (std::size_t t = phase; t < in.samples.size(); t += lag) seg.push_back(in.samples[t]);
    }
    return out;
}

} // namespace symdyn
