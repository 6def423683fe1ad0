#pragma once

// Shared fixtures and independent oracles for the test suite. Oracles here
// deliberately use different algorithms than the library (direct linear
// solves, brute-force scans, literal formula transcriptions) so agreement is
// evidence, not tautology.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include <symdyn/symdyn.hpp>

namespace testutil {

// ---------------------------------------------------------------------------
// the lumpable ternary source used across suites
//
// T is symmetric stochastic with eigenvalues exactly {1, 0.1, -0.3}
// (constructed as (1/3)J + 0.1 u2 u2^T - 0.3 u3 u3^T with u2 = (1,-1,0)/sqrt2,
// u3 = (1,1,-2)/sqrt6), so its magnitude spectrum is {1, 0.3, 0.1}:
//   sum of squares 0.10 >= 0.05  -> two-symbol words still carry correlation
//   sum of cubes  0.028 <  0.05  -> three-symbol words do not
// The negative second eigenvalue also makes the lag-1 autocorrelation of any
// monotone symbol embedding negative, so the decorrelation lag is 1.
inline const std::vector<std::vector<double>>& lumpable_rows() {
    static const std::vector<std::vector<double>> t = {
        {1.0 / 3.0, 7.0 / 30.0, 13.0 / 30.0},
        {7.0 / 30.0, 1.0 / 3.0, 13.0 / 30.0},
        {13.0 / 30.0, 13.0 / 30.0, 2.0 / 15.0},
    };
    return t;
}

inline double det3(const symdyn::dmatrix& a) {
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
         - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
         + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

// ---------------------------------------------------------------------------
// model builders

/// Assemble a model directly from emission rows; counts default to a scaled
/// integer image of the rows so empirical weighting has something to chew on.
inline symdyn::dmarkov_model make_model(std::uint32_t alphabet, std::uint32_t depth,
                                        const std::vector<std::vector<double>>& rows,
                                        std::uint64_t counts_scale = 1000) {
    symdyn::dmarkov_model m;
    m.alphabet_size = alphabet;
    m.depth = depth;
    m.prior_weight = 0.0;
    const std::size_t nq = symdyn::state_count_for(alphabet, depth);
    if (rows.size() != nq) throw std::runtime_error("make_model: wrong row count");
    m.emission = symdyn::dmatrix(nq, alphabet);
    m.counts = symdyn::cmatrix(nq, alphabet, 0);
    for (std::size_t q = 0; q < nq; ++q)
        for (std::uint32_t s = 0; s < alphabet; ++s) {
            m.emission(q, s) = rows[q][s];
            m.counts(q, s) = static_cast<std::uint64_t>(
                std::llround(rows[q][s] * static_cast<double>(counts_scale)));
        }
    m.stationary = symdyn::stationary_distribution(m, {}, &m.stationary_diag);
    return m;
}

/// The 9-state machine over length-2 words whose emission row depends only on
/// the last symbol: state (a,b) emits via T[b]. It lumps exactly by last
/// symbol and its lumped transition matrix is T itself.
inline symdyn::dmarkov_model make_lumpable_model() {
    std::vector<std::vector<double>> rows(9);
    for (std::size_t q = 0; q < 9; ++q) rows[q] = lumpable_rows()[q % 3];
    return make_model(3, 2, rows);
}

/// Random strictly-positive stochastic rows (flat Dirichlet via exponentials).
inline std::vector<std::vector<double>> random_rows(symdyn::uniform_stream& rng, std::size_t n,
                                                    std::size_t cols) {
    std::vector<std::vector<double>> rows(n, std::vector<double>(cols));
    for (auto& r : rows) {
        double total = 0.0;
        for (auto& v : r) {
            v = -std::log(1.0 - rng.next()) + 1e-3; // bounded away from zero
            total += v;
        }
        for (auto& v : r) v /= total;
    }
    return rows;
}

/// Random onto map from n states to nc clusters: first nc states pin one
/// cluster each (shuffled), the rest draw uniformly.
inline symdyn::cluster_map random_onto_map(symdyn::uniform_stream& rng, std::size_t n,
                                           std::size_t nc) {
    symdyn::cluster_map f;
    f.num_clusters = nc;
    f.assignment.resize(n);
    std::vector<std::uint32_t> pin(n);
    for (std::size_t i = 0; i < n; ++i) pin[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next() * static_cast<double>(i));
        std::swap(pin[i - 1], pin[j]);
    }
    for (std::size_t c = 0; c < nc; ++c) f.assignment[pin[c]] = static_cast<std::uint32_t>(c);
    for (std::size_t i = nc; i < n; ++i)
        f.assignment[pin[i]] =
            static_cast<std::uint32_t>(rng.next() * static_cast<double>(nc));
    return f;
}

// ---------------------------------------------------------------------------
// oracles

/// Stationary vector by direct null-space solve: (T^t - I) x = 0 with the sum
/// constraint replacing the last equation. Entirely different machinery from
/// the library's power iteration.
inline std::vector<double> nullspace_stationary(const symdyn::dmarkov_model& m) {
    const symdyn::dmatrix t = symdyn::transition_from_emission(m);
    const auto n = static_cast<Eigen::Index>(t.rows());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            a(i, j) = t(static_cast<std::size_t>(j), static_cast<std::size_t>(i))
                      - (i == j ? 1.0 : 0.0);
    for (Eigen::Index j = 0; j < n; ++j) a(n - 1, j) = 1.0;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    const Eigen::VectorXd x = a.fullPivLu().solve(b);
    return {x.data(), x.data() + n};
}

/// Window counts by literal string bookkeeping, segment by segment.
inline symdyn::cmatrix naive_count(const symdyn::symbol_sequence& seq, std::uint32_t depth) {
    std::map<std::string, std::vector<std::uint64_t>> table;
    for (std::size_t g = 0; g < seq.segment_count(); ++g) {
        const auto sym = seq.segment(g);
        if (sym.size() <= depth) continue;
        for (std::size_t k = depth; k < sym.size(); ++k) {
            std::string word(sym.begin() + static_cast<std::ptrdiff_t>(k - depth),
                             sym.begin() + static_cast<std::ptrdiff_t>(k));
            auto& row = table[word];
            row.resize(seq.alphabet_size, 0);
            ++row[sym[k]];
        }
    }
    const std::size_t nq = symdyn::state_count_for(seq.alphabet_size, depth);
    symdyn::cmatrix counts(nq, seq.alphabet_size, 0);
    for (const auto& [word, row] : table) {
        std::size_t q = 0;
        for (char c : word) q = q * seq.alphabet_size + static_cast<std::uint8_t>(c);
        for (std::uint32_t s = 0; s < seq.alphabet_size; ++s)
            counts(q, s) = s < row.size() ? row[s] : 0;
    }
    return counts;
}

/// Complete-linkage agglomeration by definition: cluster distance is the
/// brute-force maximum over member leaf pairs, recomputed from the original
/// matrix at every step (no incremental folding).
inline symdyn::dendrogram naive_complete_linkage(const symdyn::dmatrix& d0) {
    const std::size_t n = d0.rows();
    symdyn::dendrogram tree;
    tree.leaves = n;
    std::map<std::uint32_t, std::vector<std::uint32_t>> members;
    for (std::uint32_t i = 0; i < n; ++i) members[i] = {i};

    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = 0.0;
        std::uint32_t blo = 0, bhi = 0;
        bool found = false;
        for (auto ita = members.begin(); ita != members.end(); ++ita) {
            for (auto itb = std::next(ita); itb != members.end(); ++itb) {
                double v = 0.0;
                for (auto a : ita->second)
                    for (auto b : itb->second) v = std::max(v, d0(a, b));
                const std::uint32_t lo = std::min(ita->first, itb->first);
                const std::uint32_t hi = std::max(ita->first, itb->first);
                if (!found || v < best || (v == best && (lo < blo || (lo == blo && hi < bhi)))) {
                    found = true;
                    best = v;
                    blo = lo;
                    bhi = hi;
                }
            }
        }
        const auto id = static_cast<std::uint32_t>(n + step);
        auto merged = members[blo];
        merged.insert(merged.end(), members[bhi].begin(), members[bhi].end());
        members.erase(blo);
        members.erase(bhi);
        members[id] = std::move(merged);
        tree.merges.push_back({blo, bhi, id, best});
    }
    return tree;
}

// ---------------------------------------------------------------------------
// filesystem scratch space

struct temp_dir {
    std::filesystem::path path;

    explicit temp_dir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        const auto stamp = std::to_string(::getpid()) + "_" + std::to_string(counter++);
        path = std::filesystem::temp_directory_path() / ("symdyn_" + tag + "_" + stamp);
        std::filesystem::create_directories(path);
    }
    ~temp_dir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    temp_dir(const temp_dir&) = delete;
    temp_dir& operator=(const temp_dir&) = delete;
};

/// CSV with one sample per line.
inline std::filesystem::path write_series_csv(const std::filesystem::path& dir,
                                              const std::string& name,
                                              const std::vector<double>& samples) {
    std::string text;
    for (double v : samples) {
        text += symdyn::fmt17(v);
        text += '\n';
    }
    const auto p = dir / name;
    symdyn::write_file_atomic(p, text);
    return p;
}

/// Deterministic continuous embedding of a generated symbol stream: symbol s
/// maps into the band [s + 0.05, s + 0.95), so tercile cells recover the
/// symbols up to the (tiny) quantile-boundary mismatch.
inline std::vector<double> jittered_embedding(const symdyn::symbol_sequence& seq,
                                              std::uint64_t seed) {
    symdyn::uniform_stream rng(seed);
    std::vector<double> x;
    x.reserve(seq.size());
    for (std::uint8_t s : seq.symbols) x.push_back(static_cast<double>(s) + 0.05 + 0.9 * rng.next());
    return x;
}

} // namespace testutil
