#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cluster.hpp"
#include "errors.hpp"
#include "matrix.hpp"
#include "model.hpp"
#include "reduce.hpp"

namespace symdyn {

/// Largest symmetric K-L distance between any two emission rows: how far the
/// model is from an i.i.d. source in its most separated pair of contexts.
/// Zero for single-state models and for models whose rows all coincide.
/// Invariant under relabeling states.
inline double cluster_divergence(const dmatrix& emission) {
    double worst = 0.0;
    for (std::size_t i = 0; i < emission.rows(); ++i)
        for (std::size_t j = i + 1; j < emission.rows(); ++j)
            worst = std::max(worst, symmetric_kl(emission.row(i), emission.row(j)));
    return worst;
}

inline double cluster_divergence(const dmarkov_model& m) { return cluster_divergence(m.emission); }
inline double cluster_divergence(const reduced_model& r) { return cluster_divergence(r.emission); }

/// Stationary-weighted divergence between each context's emissions and the
/// overall symbol distribution: sum_q pi(q) d(row_q, marginal), where the
/// marginal is the stationary mixture of the rows. The symmetric K-L distance
/// is the default; `one_sided` switches to plain KL(row || marginal).
/// Zero exactly when every visited context emits the marginal distribution.
inline double discrepancy_statistic(const dmatrix& emission, std::span<const double> stationary,
                                    bool one_sided = false) {
    const std::size_t n = emission.rows();
    const std::size_t a = emission.cols();
    std::vector<double> marginal(a, 0.0);
    for (std::size_t q = 0; q < n; ++q)
        for (std::size_t s = 0; s < a; ++s)
            marginal[s] += stationary[q] * emission(q, s);

    double total = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
        if (stationary[q] == 0.0) continue;
        double d = 0.0;
        for (std::size_t s = 0; s < a; ++s) {
            const double p = emission(q, s);
            const double g = marginal[s];
            if (p <= 0.0 || g <= 0.0)
                throw zero_probability_error("discrepancy_statistic: probabilities must be strictly positive");
            d += one_sided ? p * (std::log(p) - std::log(g))
                           : (p - g) * (std::log(p) - std::log(g));
        }
        total += stationary[q] * d;
    }
    return total;
}

inline double discrepancy_statistic(const dmarkov_model& m, bool one_sided = false) {
    return discrepancy_statistic(m.emission, m.stationary, one_sided);
}
inline double discrepancy_statistic(const reduced_model& r, bool one_sided = false) {
    return discrepancy_statistic(r.emission, r.stationary, one_sided);
}

/// One analysis row per input sample in a batch.
struct anomaly_record {
    std::string sample_id;
    double delta_m = 0.0;      ///< cluster_divergence of the fitted model
    double h_m = 0.0;          ///< discrepancy_statistic of the fitted model
    std::uint32_t depth = 1;   ///< estimated word depth
    std::size_t selected_n = 0;///< model order chosen by the configured criterion
};

/// Emission rows flattened row-major: the feature vector handed to external
/// classifiers. Each row is a point on the probability simplex.
inline std::vector<double> flatten_emission(const dmatrix& emission) {
    return emission.data();
}

} // namespace symdyn
