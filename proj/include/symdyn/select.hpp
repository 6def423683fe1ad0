#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cluster.hpp"
#include "distort.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "reduce.hpp"

namespace symdyn {

enum class criterion { aic, bic };

/// Penalized likelihood scores. K is the raw parameter count |A| * N; the
/// rows of the emission table are the fitted parameters.
inline double aic(double log_likelihood, std::size_t k) {
    return -2.0 * log_likelihood + 2.0 * static_cast<double>(k);
}

inline double bic(double log_likelihood, std::size_t k, std::size_t n_obs) {
    if (n_obs == 0)
        throw error(errc::invalid_argument, "bic: no scored observations");
    return -2.0 * log_likelihood + static_cast<double>(k) * std::log(static_cast<double>(n_obs));
}

struct score_row {
    std::size_t num_states = 0;
    double log_likelihood = 0.0;
    std::size_t k = 0; ///< parameter count, |A| * num_states
    double aic = 0.0;
    double bic = 0.0;
    double kappa = 0.0;
    double bound = 0.0; ///< analytic Hamming bound at the configured length
    bool vacuous = false;
};

struct score_table {
    std::vector<score_row> rows; ///< ascending in num_states
    std::size_t n_obs = 0;       ///< scored emissions behind every row
    std::size_t bound_length = 0;
    std::size_t selected_aic = 0; ///< argmin rows; ties go to fewer states
    std::size_t selected_bic = 0;
};

struct score_options {
    weighting emission_weighting = weighting::stationary;
    std::size_t min_states = 1;
    std::size_t max_states = 0;   ///< 0: up to the leaf count
    std::size_t bound_length = 1000; ///< n for the per-row Hamming bound
};

/// Score every cut of the dendrogram between the requested sizes. Scanning
/// ascending and keeping strict minima implements the tie rule: equal scores
/// prefer the smaller model.
inline score_table score_all_cuts(const dmarkov_model& m, const dendrogram& tree,
                                  const symbol_sequence& seq, const score_options& opt = {}) {
    const std::size_t hi = opt.max_states == 0 ? tree.leaves : opt.max_states;
    if (opt.min_states < 1 || hi > tree.leaves || opt.min_states > hi)
        throw bad_cut_error("score_all_cuts: state range must satisfy 1 <= min <= max <= leaves");

    score_table table;
    table.n_obs = observation_count(seq, m.depth);
    table.bound_length = opt.bound_length;

    double best_aic = 0.0, best_bic = 0.0;
    for (std::size_t n = opt.min_states; n <= hi; ++n) {
        const cluster_map f = cut(tree, n);
        const dmatrix e = reduce_emission(m, f, opt.emission_weighting);

        score_row row;
        row.num_states = n;
        row.log_likelihood = reduced_log_likelihood(m, f, seq, e);
        row.k = static_cast<std::size_t>(m.alphabet_size) * n;
        row.aic = aic(row.log_likelihood, row.k);
        row.bic = bic(row.log_likelihood, row.k, table.n_obs);
        row.kappa = kappa(m.emission, e, f);
        row.bound = hamming_bound(row.kappa, opt.bound_length, m.depth);
        row.vacuous = row.bound > 1.0;

        if (table.rows.empty() || row.aic < best_aic) {
            best_aic = row.aic;
            table.selected_aic = n;
        }
        if (table.rows.empty() || row.bic < best_bic) {
            best_bic = row.bic;
            table.selected_bic = n;
        }
        table.rows.push_back(row);
    }
    return table;
}

inline std::size_t selected_states(const score_table& t, criterion c) {
    return c == criterion::aic ? t.selected_aic : t.selected_bic;
}

} // namespace symdyn
