#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cluster.hpp"
#include "errors.hpp"
#include "matrix.hpp"
#include "model.hpp"
#include "random.hpp"
#include "reduce.hpp"

namespace symdyn {

/// Worst-case relative emission-probability loss introduced by merging:
/// max over states and symbols of (p - p_merged) / p. Zero exactly when every
/// state's cluster row equals its own row; always nonnegative because each
/// row and its replacement both sum to one.
inline double kappa(const dmatrix& emission, const dmatrix& cluster_emission, const cluster_map& f) {
    if (f.assignment.size() != emission.rows())
        throw error(errc::invalid_argument, "kappa: cluster map does not cover the state space");
    double worst = 0.0;
    for (std::size_t q = 0; q < emission.rows(); ++q) {
        for (std::size_t s = 0; s < emission.cols(); ++s) {
            const double p = emission(q, s);
            if (p <= 0.0)
                throw zero_probability_error("kappa: emission must be strictly positive");
            worst = std::max(worst, (p - cluster_emission(f.assignment[q], s)) / p);
        }
    }
    return worst;
}

inline double kappa(const dmarkov_model& m, const reduced_model& r) {
    return kappa(m.emission, r.emission, r.map);
}

/// Analytic bound on the expected per-symbol disagreement between the full
/// and merged models over a length-n run: sqrt((n - D - 1) kappa / (2 n)).
/// Grows to sqrt(kappa / 2) as n grows; values above 1 say nothing and are
/// reported with a vacuous flag rather than clamped.
inline double hamming_bound(double kappa_value, std::size_t n, std::uint32_t depth) {
    if (kappa_value < 0.0)
        throw error(errc::invalid_argument, "hamming_bound: kappa must be nonnegative");
    if (n <= static_cast<std::size_t>(depth) + 1)
        throw bad_length_error("hamming_bound: sequence length must exceed depth + 1");
    const double nn = static_cast<double>(n);
    return std::sqrt((nn - static_cast<double>(depth) - 1.0) * kappa_value / (2.0 * nn));
}

struct five_number_summary {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    double mean = 0.0;
};

struct distortion_report {
    double kappa = 0.0;
    double bound = 0.0;
    bool vacuous = false; ///< bound exceeds 1 and carries no information
    std::size_t sequence_length = 0;
    std::size_t trials = 0;
    five_number_summary empirical;
    std::vector<double> distances; ///< per-trial normalized Hamming distance
};

namespace detail {

/// Linear-interpolation quantile of a sorted sample (the convention used by
/// most plotting stacks), so box plots rebuild exactly from the summary.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline five_number_summary summarize(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    five_number_summary s;
    s.min = values.front();
    s.q1 = sorted_quantile(values, 0.25);
    s.median = sorted_quantile(values, 0.50);
    s.q3 = sorted_quantile(values, 0.75);
    s.max = values.back();
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(values.size());
    return s;
}

/// Next-cluster distribution given the current cluster and the symbol just
/// emitted, derived from the source model with stationary weights:
/// Pr(c' | c, s) proportional to sum_{q in c} pi(q) p(q, s) [f(shift(q, s)) = c'].
/// For a pure relabeling every row is a point mass, so the coarse chain
/// shadows the full chain exactly.
inline std::vector<dmatrix> cluster_step_given_symbol(const dmarkov_model& m, const cluster_map& f) {
    const std::size_t nc = f.num_clusters;
    std::vector<dmatrix> step(m.alphabet_size, dmatrix(nc, nc, 0.0));
    for (std::size_t q = 0; q < m.state_count(); ++q)
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
            step[s](f.assignment[q], f.assignment[m.successor(q, s)]) += m.stationary[q] * m.emission(q, s);
    for (std::uint32_t s = 0; s < m.alphabet_size; ++s) {
        for (std::size_t c = 0; c < nc; ++c) {
            double total = 0.0;
            for (std::size_t j = 0; j < nc; ++j) total += step[s](c, j);
            if (total > 0.0) {
                for (std::size_t j = 0; j < nc; ++j) step[s](c, j) /= total;
            } else {
                for (std::size_t j = 0; j < nc; ++j) step[s](c, j) = 1.0 / static_cast<double>(nc);
            }
        }
    }
    return step;
}

} // namespace detail

/// Empirical symbol-level disagreement between the full model and its
/// reduction. Each trial runs both chains on common random numbers: one
/// shared uniform decides both emissions through the same inverse-CDF map,
/// and a second shared uniform advances the coarse state, so any divergence
/// reflects the models rather than sampling luck. Initial states round-robin
/// over the full state space; trial seeds derive from the base seed, so the
/// whole experiment is reproducible.
inline distortion_report monte_carlo_hamming(const dmarkov_model& m, const reduced_model& r,
                                             std::size_t n, std::size_t trials, std::uint64_t seed,
                                             std::vector<std::vector<std::uint8_t>>* full_sequences = nullptr) {
    if (n == 0 || trials == 0)
        throw error(errc::invalid_argument, "monte_carlo_hamming: need n >= 1 and trials >= 1");
    if (r.map.assignment.size() != m.state_count())
        throw error(errc::invalid_argument, "monte_carlo_hamming: reduction does not match the model");

    const auto step = detail::cluster_step_given_symbol(m, r.map);

    distortion_report rep;
    rep.kappa = kappa(m, r);
    rep.bound = hamming_bound(rep.kappa, n, m.depth);
    rep.vacuous = rep.bound > 1.0;
    rep.sequence_length = n;
    rep.trials = trials;
    rep.distances.reserve(trials);
    if (full_sequences) {
        full_sequences->clear();
        full_sequences->reserve(trials);
    }

    for (std::size_t t = 0; t < trials; ++t) {
        uniform_stream rng(derive_seed(seed, t));
        std::size_t q = t % m.state_count();
        std::size_t c = r.map.assignment[q];
        std::size_t mismatches = 0;
        std::vector<std::uint8_t> emitted;
        if (full_sequences) emitted.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double u_sym = rng.next();
            const double u_step = rng.next();
            const auto s_full = static_cast<std::uint32_t>(sample_category(m.emission.row(q), u_sym));
            const auto s_red = static_cast<std::uint32_t>(sample_category(r.emission.row(c), u_sym));
            if (s_full != s_red) ++mismatches;
            if (full_sequences) emitted.push_back(static_cast<std::uint8_t>(s_full));
            q = m.successor(q, s_full);
            c = sample_category(step[s_red].row(c), u_step);
        }
        rep.distances.push_back(static_cast<double>(mismatches) / static_cast<double>(n));
        if (full_sequences) full_sequences->push_back(std::move(emitted));
    }
    rep.empirical = detail::summarize(rep.distances);
    return rep;
}

} // namespace symdyn
