#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "model.hpp"

namespace symdyn {

/// Symmetric Kullback-Leibler distance between two strictly positive
/// distributions: KL(p||q) + KL(q||p) = sum_s (p_s - q_s) log(p_s / q_s).
/// Nonnegative, zero only for equal rows; not a metric (no triangle
/// inequality), which complete linkage below does not need.
inline double symmetric_kl(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw error(errc::invalid_argument, "symmetric_kl: dimension mismatch");
    double d = 0.0;
    for (std::size_t s = 0; s < p.size(); ++s) {
        if (p[s] <= 0.0 || q[s] <= 0.0)
            throw zero_probability_error("symmetric_kl: distributions must be strictly positive");
        d += (p[s] - q[s]) * (std::log(p[s]) - std::log(q[s]));
    }
    return d;
}

/// All pairwise symmetric K-L distances between emission rows.
/// Requires a smoothed model (every probability positive).
inline dmatrix pairwise_kl_distance(const dmarkov_model& m) {
    const std::size_t n = m.state_count();
    dmatrix d(n, n, 0.0);
    // Precompute logs once; the pair loop then touches each row O(n) times.
    dmatrix lg(n, m.alphabet_size);
    for (std::size_t q = 0; q < n; ++q)
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s) {
            if (m.emission(q, s) <= 0.0)
                throw zero_probability_error("pairwise_kl_distance: emission has a zero entry; "
                                             "estimate with a positive prior weight");
            lg(q, s) = std::log(m.emission(q, s));
        }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 0.0;
            for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
                v += (m.emission(i, s) - m.emission(j, s)) * (lg(i, s) - lg(j, s));
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

/// Agglomerative merge history. Leaves are 0..leaves-1; merge k creates
/// cluster id leaves+k. Heights are non-decreasing under complete linkage.
struct dendrogram {
    struct merge {
        std::uint32_t a = 0, b = 0; ///< cluster ids being joined, a < b
        std::uint32_t id = 0;       ///< id of the new cluster
        double height = 0.0;        ///< complete-linkage distance at the join
    };
    std::size_t leaves = 0;
    std::vector<merge> merges;
};

/// State-to-cluster assignment with labels in [0, num_clusters).
struct cluster_map {
    std::vector<std::uint32_t> assignment;
    std::size_t num_clusters = 0;

    static cluster_map identity(std::size_t n) {
        cluster_map f;
        f.num_clusters = n;
        f.assignment.resize(n);
        std::iota(f.assignment.begin(), f.assignment.end(), 0u);
        return f;
    }
};

/// Complete-linkage agglomeration over a symmetric distance matrix.
/// Cluster-cluster distance is the maximum leaf-pair distance, maintained by
/// the max update rule. Equal candidate distances are broken toward the pair
/// with the lexicographically smallest (lower id, higher id), so the merge
/// order is deterministic for any input.
inline dendrogram hierarchical_cluster(const dmatrix& dist) {
    const std::size_t n = dist.rows();
    if (n == 0 || dist.cols() != n)
        throw error(errc::invalid_argument, "hierarchical_cluster: distance matrix must be square");
    if (n > 4096)
        throw error(errc::invalid_argument, "hierarchical_cluster: over 4096 items; reduce the state space first");

    dendrogram tree;
    tree.leaves = n;
    if (n == 1) return tree;

    dmatrix d = dist;                      // working distances, slot-indexed
    std::vector<std::uint32_t> id(n);      // cluster id living in each slot
    std::vector<bool> active(n, true);
    std::iota(id.begin(), id.end(), 0u);

    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        std::uint32_t blo = 0, bhi = 0;
        bool found = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double v = d(i, j);
                const std::uint32_t lo = std::min(id[i], id[j]);
                const std::uint32_t hi = std::max(id[i], id[j]);
                if (!found || v < best || (v == best && (lo < blo || (lo == blo && hi < bhi)))) {
                    found = true;
                    best = v;
                    bi = i; bj = j; blo = lo; bhi = hi;
                }
            }
        }
        const auto new_id = static_cast<std::uint32_t>(n + step);
        tree.merges.push_back({blo, bhi, new_id, best});
        // Fold slot bj into slot bi with the complete-linkage (max) rule.
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double v = std::max(d(bi, k), d(bj, k));
            d(bi, k) = v;
            d(k, bi) = v;
        }
        id[bi] = new_id;
        active[bj] = false;
    }
    return tree;
}

/// Partition after all but (num_clusters - 1) merges: replaying the first
/// leaves - num_clusters joins leaves exactly num_clusters groups. Labels are
/// assigned by each group's smallest member state, so they are stable under
/// any relabeling of merge ids.
inline cluster_map cut(const dendrogram& tree, std::size_t num_clusters) {
    const std::size_t n = tree.leaves;
    if (num_clusters < 1 || num_clusters > n)
        throw bad_cut_error("cut: cluster count must be in [1, leaf count]");
    const std::size_t k = n - num_clusters;
    if (k > tree.merges.size())
        throw bad_cut_error("cut: dendrogram has too few merges for this cut");

    // Union ids bottom-up through the first k merges.
    std::vector<std::uint32_t> parent(n + tree.merges.size());
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (std::size_t i = 0; i < k; ++i) {
        const auto& mg = tree.merges[i];
        parent[find(mg.a)] = mg.id;
        parent[find(mg.b)] = mg.id;
    }

    cluster_map f;
    f.num_clusters = num_clusters;
    f.assignment.assign(n, 0);
    std::vector<std::int64_t> label_of_root(n + tree.merges.size(), -1);
    std::uint32_t next = 0;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        const auto root = find(static_cast<std::uint32_t>(leaf));
        if (label_of_root[root] < 0) label_of_root[root] = next++;
        f.assignment[leaf] = static_cast<std::uint32_t>(label_of_root[root]);
    }
    return f;
}

} // namespace symdyn
