#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cluster.hpp"
#include "errors.hpp"
#include "matrix.hpp"
#include "model.hpp"

namespace symdyn {

/// How states are weighted when their emission rows are averaged.
enum class weighting {
    stationary, ///< long-run state probabilities (default)
    empirical   ///< observed visit counts; makes the merged row the ML row
};

/// Coarse-grained model over clusters of words. The cluster map and the
/// emission weighting are kept as provenance.
struct reduced_model {
    std::uint32_t alphabet_size = 0;
    std::uint32_t source_depth = 1;
    dmatrix transition;             ///< N x N row-stochastic
    dmatrix emission;               ///< N x |A| row-stochastic
    std::vector<double> stationary; ///< aggregated source stationary mass
    cluster_map map;
    weighting emission_weighting = weighting::stationary;
    /// Clusters that carry no weight; their rows were set uniform.
    std::vector<std::uint32_t> zero_mass_clusters;

    [[nodiscard]] std::size_t num_states() const { return emission.rows(); }
};

namespace detail {

inline void check_map(const dmarkov_model& m, const cluster_map& f) {
    if (f.assignment.size() != m.state_count())
        throw error(errc::invalid_argument, "cluster map does not cover the state space");
    for (auto c : f.assignment)
        if (c >= f.num_clusters)
            throw error(errc::invalid_argument, "cluster label out of range");
}

/// A map with as many clusters as states is a pure relabeling; aggregate by
/// copying probabilities so the result is the transition matrix exactly.
inline bool relabeling_fast_path(const dmarkov_model& m, const cluster_map& f, dmatrix& out) {
    if (f.num_clusters != m.state_count()) return false;
    out = dmatrix(f.num_clusters, f.num_clusters, 0.0);
    for (std::size_t q = 0; q < m.state_count(); ++q)
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
            out(f.assignment[q], f.assignment[m.successor(q, s)]) += m.emission(q, s);
    return true;
}

} // namespace detail

/// Cluster-to-cluster transition by the Bayesian chain: posterior of the
/// previous state given the next state, marginalized to the previous cluster,
/// inverted back to a next-state distribution given the cluster, and finally
/// marginalized to the next cluster. Stationary probabilities play the prior
/// at both inversions. Zero-mass clusters get uniform rows and are reported.
inline dmatrix reduce_transition(const dmarkov_model& m, const cluster_map& f,
                                 std::vector<std::uint32_t>* zero_mass = nullptr) {
    detail::check_map(m, f);
    dmatrix t;
    if (detail::relabeling_fast_path(m, f, t)) return t;

    const std::size_t n = m.state_count();
    const std::size_t nc = f.num_clusters;
    const auto& pi = m.stationary;

    // Pr(next state q') = sum_q Pr(q' | q) pi(q), the normalizer of the first
    // inversion. Computed literally rather than substituting pi(q').
    std::vector<double> denom(n, 0.0);
    m.apply_transition(pi, denom);

    // post(q', c) = Pr(previous cluster = c | next state = q')
    dmatrix post(n, nc, 0.0);
    for (std::size_t q = 0; q < n; ++q) {
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s) {
            const double w = m.emission(q, s) * pi[q];
            if (w == 0.0) continue;
            const std::size_t succ = m.successor(q, s);
            if (denom[succ] > 0.0) post(succ, f.assignment[q]) += w / denom[succ];
        }
    }

    t = dmatrix(nc, nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
        // Second inversion: Pr(next state | previous cluster = c).
        double norm = 0.0;
        for (std::size_t qn = 0; qn < n; ++qn) norm += post(qn, c) * pi[qn];
        if (norm <= 0.0) {
            for (std::size_t j = 0; j < nc; ++j) t(c, j) = 1.0 / static_cast<double>(nc);
            if (zero_mass) zero_mass->push_back(static_cast<std::uint32_t>(c));
            continue;
        }
        for (std::size_t qn = 0; qn < n; ++qn) {
            const double v = post(qn, c) * pi[qn];
            if (v != 0.0) t(c, f.assignment[qn]) += v / norm;
        }
    }
    return t;
}

/// The same object in one step: stationary-weighted row aggregation,
/// T(c,c') = sum_{q in c} pi(q) sum_{q' in c'} Pr(q'|q) / sum_{q in c} pi(q).
/// Algebraically equal to reduce_transition; kept as an independent route so
/// the two implementations can check each other.
inline dmatrix reduce_transition_closed_form(const dmarkov_model& m, const cluster_map& f,
                                             std::vector<std::uint32_t>* zero_mass = nullptr) {
    detail::check_map(m, f);
    dmatrix t;
    if (detail::relabeling_fast_path(m, f, t)) return t;

    const std::size_t nc = f.num_clusters;
    t = dmatrix(nc, nc, 0.0);
    std::vector<double> mass(nc, 0.0);
    for (std::size_t q = 0; q < m.state_count(); ++q) {
        const double w = m.stationary[q];
        const auto c = f.assignment[q];
        mass[c] += w;
        if (w == 0.0) continue;
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
            t(c, f.assignment[m.successor(q, s)]) += w * m.emission(q, s);
    }
    for (std::size_t c = 0; c < nc; ++c) {
        if (mass[c] > 0.0) {
            for (std::size_t j = 0; j < nc; ++j) t(c, j) /= mass[c];
        } else {
            for (std::size_t j = 0; j < nc; ++j) t(c, j) = 1.0 / static_cast<double>(nc);
            if (zero_mass) zero_mass->push_back(static_cast<std::uint32_t>(c));
        }
    }
    return t;
}

/// Weighted average of member emission rows. Single-member clusters copy
/// their row verbatim (a weighted average of one row is that row; copying
/// keeps it bit-exact). Zero-weight clusters get uniform rows and a report.
inline dmatrix reduce_emission(const dmarkov_model& m, const cluster_map& f,
                               weighting w = weighting::stationary,
                               std::vector<std::uint32_t>* zero_mass = nullptr) {
    detail::check_map(m, f);
    const std::size_t nc = f.num_clusters;

    std::vector<double> weight(m.state_count());
    for (std::size_t q = 0; q < m.state_count(); ++q) {
        if (w == weighting::stationary) {
            weight[q] = m.stationary[q];
        } else {
            double rowsum = 0.0;
            for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
                rowsum += static_cast<double>(m.counts(q, s));
            weight[q] = rowsum;
        }
    }

    std::vector<std::size_t> size(nc, 0), lone(nc, 0);
    for (std::size_t q = 0; q < m.state_count(); ++q) {
        ++size[f.assignment[q]];
        lone[f.assignment[q]] = q;
    }

    dmatrix e(nc, m.alphabet_size, 0.0);
    std::vector<double> mass(nc, 0.0);
    for (std::size_t q = 0; q < m.state_count(); ++q) {
        const auto c = f.assignment[q];
        if (size[c] == 1) continue;
        mass[c] += weight[q];
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
            e(c, s) += weight[q] * m.emission(q, s);
    }
    for (std::size_t c = 0; c < nc; ++c) {
        if (size[c] == 1) {
            for (std::uint32_t s = 0; s < m.alphabet_size; ++s) e(c, s) = m.emission(lone[c], s);
        } else if (mass[c] > 0.0) {
            for (std::uint32_t s = 0; s < m.alphabet_size; ++s) e(c, s) /= mass[c];
        } else {
            for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
                e(c, s) = 1.0 / static_cast<double>(m.alphabet_size);
            if (zero_mass) zero_mass->push_back(static_cast<std::uint32_t>(c));
        }
    }
    return e;
}

/// Aggregated long-run cluster mass: the stationary vector summed over each
/// cluster. It is automatically a fixed vector of the aggregated transition.
inline std::vector<double> aggregate_stationary(const dmarkov_model& m, const cluster_map& f) {
    detail::check_map(m, f);
    std::vector<double> pi(f.num_clusters, 0.0);
    for (std::size_t q = 0; q < m.state_count(); ++q) pi[f.assignment[q]] += m.stationary[q];
    return pi;
}

/// Assemble the full coarse-grained model for a given cut.
inline reduced_model build_reduced_model(const dmarkov_model& m, const cluster_map& f,
                                         weighting w = weighting::stationary) {
    reduced_model r;
    r.alphabet_size = m.alphabet_size;
    r.source_depth = m.depth;
    r.map = f;
    r.emission_weighting = w;
    r.transition = reduce_transition(m, f, &r.zero_mass_clusters);
    r.emission = reduce_emission(m, f, w, &r.zero_mass_clusters);
    std::sort(r.zero_mass_clusters.begin(), r.zero_mass_clusters.end());
    r.zero_mass_clusters.erase(std::unique(r.zero_mass_clusters.begin(), r.zero_mass_clusters.end()),
                               r.zero_mass_clusters.end());
    r.stationary = aggregate_stationary(m, f);
    return r;
}

/// Log-likelihood of a sequence when every word is first projected to its
/// cluster and scored against the cluster's emission row. Grouping the terms
/// by word (counts times log row) keeps the sum identical to the symbol-by-
/// symbol pass while staying cheap to evaluate across many cuts.
inline double reduced_log_likelihood(const dmarkov_model& m, const cluster_map& f,
                                     const symbol_sequence& seq, const dmatrix& cluster_emission) {
    detail::check_map(m, f);
    if (seq.alphabet_size != m.alphabet_size)
        throw error(errc::invalid_argument, "reduced_log_likelihood: alphabet mismatch");
    const cmatrix c = count_dgrams(seq, m.depth);
    double ll = 0.0;
    for (std::size_t q = 0; q < c.rows(); ++q) {
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s) {
            const auto nqs = c(q, s);
            if (nqs == 0) continue;
            const double p = cluster_emission(f.assignment[q], s);
            if (p <= 0.0) return -std::numeric_limits<double>::infinity();
            ll += static_cast<double>(nqs) * std::log(p);
        }
    }
    return ll;
}

inline double reduced_log_likelihood(const dmarkov_model& m, const cluster_map& f,
                                     const symbol_sequence& seq,
                                     weighting w = weighting::stationary) {
    return reduced_log_likelihood(m, f, seq, reduce_emission(m, f, w));
}

} // namespace symdyn
