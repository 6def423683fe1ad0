#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <tuple>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "partition.hpp"
#include "random.hpp"

namespace symdyn {

/// Hard cap on |A|^D so state indexing stays in cheap integer range and
/// accidental flag combinations cannot allocate absurd tables.
inline constexpr std::size_t max_state_count = 1u << 24;

/// Number of conditioning words: |A|^D, overflow-checked.
inline std::size_t state_count_for(std::uint32_t alphabet_size, std::uint32_t depth) {
    if (alphabet_size < 1) throw error(errc::invalid_argument, "alphabet size must be positive");
    if (depth < 1) throw error(errc::invalid_argument, "depth must be at least 1");
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < depth; ++i) {
        n *= alphabet_size;
        if (n > max_state_count)
            throw error(errc::invalid_argument, "state space |A|^D exceeds the supported limit");
    }
    return n;
}

/// How the stationary distribution was obtained; kept for diagnostics.
struct stationary_info {
    std::size_t iterations = 0;
    double residual = 0.0; ///< final max-norm of pi*T - pi
    bool damped = false;   ///< averaged iteration was needed (periodic/oscillating chain)
};

struct stationary_options {
    bool allow_damping = true;
    std::size_t max_iterations = 100000;
    double tolerance = 1e-10; ///< accepted max-norm residual
};

/// Markov model over length-D words of an |A|-symbol alphabet, enumerated
/// lexicographically (first word symbol most significant). The word-to-word
/// transition matrix is implied by the emission table and the shift rule, so
/// it is materialized only on demand.
struct dmarkov_model {
    std::uint32_t alphabet_size = 0;
    std::uint32_t depth = 1;
    double prior_weight = 1.0;
    cmatrix counts;                 ///< |Q| x |A| window counts
    dmatrix emission;               ///< |Q| x |A| row-stochastic
    std::vector<double> stationary; ///< |Q|, sums to 1
    stationary_info stationary_diag;

    [[nodiscard]] std::size_t state_count() const { return emission.rows(); }

    /// Sliding-block shift: word a1..aD followed by symbol s becomes a2..aD s.
    [[nodiscard]] std::size_t successor(std::size_t state, std::uint32_t symbol) const {
        const std::size_t tail = state_count() / alphabet_size;
        return (state % tail) * alphabet_size + symbol;
    }

    [[nodiscard]] std::vector<std::uint8_t> word_of_state(std::size_t state) const {
        std::vector<std::uint8_t> w(depth);
        for (std::uint32_t i = depth; i-- > 0;) {
            w[i] = static_cast<std::uint8_t>(state % alphabet_size);
            state /= alphabet_size;
        }
        return w;
    }

    [[nodiscard]] std::size_t state_of_word(std::span<const std::uint8_t> word) const {
        std::size_t idx = 0;
        for (std::uint8_t s : word) idx = idx * alphabet_size + s;
        return idx;
    }

    /// y = x * T where T is the implied word transition matrix. O(|Q|*|A|).
    void apply_transition(std::span<const double> x, std::span<double> y) const {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t q = 0; q < state_count(); ++q) {
            if (x[q] == 0.0) continue;
            for (std::uint32_t s = 0; s < alphabet_size; ++s)
                y[successor(q, s)] += x[q] * emission(q, s);
        }
    }
};

/// Count symbol emissions conditioned on the preceding length-D word.
/// Windows never straddle a segment boundary; segments shorter than D+1
/// contribute nothing. States are all |A|^D words, visited or not.
inline cmatrix count_dgrams(const symbol_sequence& seq, std::uint32_t depth) {
    if (seq.alphabet_size < 1)
        throw error(errc::invalid_argument, "count_dgrams: sequence has no alphabet");
    const std::size_t nstates = state_count_for(seq.alphabet_size, depth);
    const std::size_t tail = nstates / seq.alphabet_size;

    bool any_window = false;
    cmatrix counts(nstates, seq.alphabet_size, 0);
    for (std::size_t seg = 0; seg < seq.segment_count(); ++seg) {
        const auto sym = seq.segment(seg);
        if (sym.size() <= depth) continue;
        any_window = true;
        std::size_t state = 0;
        for (std::uint32_t i = 0; i < depth; ++i) state = state * seq.alphabet_size + sym[i];
        for (std::size_t k = depth; k < sym.size(); ++k) {
            const std::uint8_t s = sym[k];
            if (s >= seq.alphabet_size)
                throw error(errc::invalid_argument, "count_dgrams: symbol out of alphabet range");
            ++counts(state, s);
            state = (state % tail) * seq.alphabet_size + s;
        }
    }
    if (!any_window)
        throw sequence_too_short_error("count_dgrams: no segment longer than the word depth");
    return counts;
}

/// Number of emissions actually scored by the likelihood: per segment,
/// everything after the first D symbols.
inline std::size_t observation_count(const symbol_sequence& seq, std::uint32_t depth) {
    std::size_t n = 0;
    for (std::size_t seg = 0; seg < seq.segment_count(); ++seg) {
        const std::size_t len = seq.segment(seg).size();
        if (len > depth) n += len - depth;
    }
    return n;
}

namespace detail {

/// Power iteration for the left fixed vector of the implied transition.
/// If the plain iteration stalls (periodic or near-periodic chains oscillate
/// forever), it restarts with the half-averaged update x <- (x + x*T)/2,
/// which damps the rotation but has exactly the same fixed points, so the
/// stationarity residual is still measured against the undamped matrix.
inline std::pair<std::vector<double>, stationary_info>
power_iteration(const dmarkov_model& m, const stationary_options& opt) {
    const std::size_t n = m.state_count();
    std::vector<double> x(n, 1.0 / static_cast<double>(n)), y(n);
    std::vector<double> best = x;
    double best_res = std::numeric_limits<double>::infinity();
    // Aim for the rounding floor, not just the acceptance tolerance: downstream
    // Bayesian inversions divide by pi entrywise and deserve every digit. The
    // stall detector below ends the loop once rounding noise takes over.
    const double hard_target = std::min(opt.tolerance, 1e-15);
    stationary_info info;

    auto run_phase = [&](bool damped, std::size_t budget) {
        std::size_t stall = 0;
        for (std::size_t it = 0; it < budget; ++it) {
            m.apply_transition(x, y);
            ++info.iterations;
            double res = 0.0, total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                res = std::max(res, std::abs(y[i] - x[i]));
                total += y[i];
            }
            if (res < best_res * 0.9999) {
                best_res = res;
                best = x;
                stall = 0;
            } else if (++stall > 500) {
                return; // oscillating or at the floating-point floor
            }
            if (damped) {
                for (std::size_t i = 0; i < n; ++i) x[i] = 0.5 * (x[i] + y[i] / total);
            } else {
                for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / total;
            }
            if (res < hard_target) { best = x; best_res = res; return; }
        }
    };

    run_phase(false, opt.max_iterations);
    if (best_res > opt.tolerance && opt.allow_damping) {
        x = best;
        info.damped = true;
        run_phase(true, opt.max_iterations);
    }

    // Renormalize and measure the definitive residual of what we return.
    double total = 0.0;
    for (double v : best) total += v;
    for (double& v : best) v /= total;
    m.apply_transition(best, y);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(y[i] - best[i]));
    info.residual = res;

    if (res > opt.tolerance)
        throw no_convergence_error("stationary_distribution: power iteration did not reach tolerance"
                                   " (periodic or reducible chain; damping "
                                   + std::string(opt.allow_damping ? "already applied" : "disabled") + ")");
    return {std::move(best), info};
}

} // namespace detail

/// Left fixed vector of the implied word transition matrix, pi = pi * T.
inline std::vector<double> stationary_distribution(const dmarkov_model& m,
                                                   const stationary_options& opt = {},
                                                   stationary_info* info_out = nullptr) {
    auto [pi, info] = detail::power_iteration(m, opt);
    if (info_out) *info_out = info;
    return pi;
}

/// Estimate the word-conditional emission table with additive smoothing.
/// prior_weight w > 0 gives (count + w) / (rowsum + |A| w); unvisited words
/// get the uniform row this reduces to. w = 0 is the maximum-likelihood
/// table, with unvisited words conventionally uniform.
inline dmarkov_model estimate_model(const symbol_sequence& seq, std::uint32_t depth,
                                    double prior_weight = 1.0,
                                    const stationary_options& stat_opt = {}) {
    if (prior_weight < 0.0)
        throw error(errc::invalid_argument, "estimate_model: prior weight must be nonnegative");
    dmarkov_model m;
    m.alphabet_size = seq.alphabet_size;
    m.depth = depth;
    m.prior_weight = prior_weight;
    m.counts = count_dgrams(seq, depth);

    const std::size_t nq = m.counts.rows();
    const std::uint32_t na = seq.alphabet_size;
    m.emission = dmatrix(nq, na);
    for (std::size_t q = 0; q < nq; ++q) {
        double rowsum = 0.0;
        for (std::uint32_t s = 0; s < na; ++s) rowsum += static_cast<double>(m.counts(q, s));
        const double denom = rowsum + prior_weight * static_cast<double>(na);
        if (denom == 0.0) {
            for (std::uint32_t s = 0; s < na; ++s) m.emission(q, s) = 1.0 / static_cast<double>(na);
        } else {
            for (std::uint32_t s = 0; s < na; ++s)
                m.emission(q, s) = (static_cast<double>(m.counts(q, s)) + prior_weight) / denom;
        }
    }
    m.stationary = stationary_distribution(m, stat_opt, &m.stationary_diag);
    return m;
}

/// Materialize the word-to-word transition matrix. Each row has at most |A|
/// nonzeros; refuse to allocate the dense form for very large state spaces.
inline dmatrix transition_from_emission(const dmarkov_model& m) {
    const std::size_t n = m.state_count();
    if (n > 4096)
        throw error(errc::invalid_argument,
                    "transition_from_emission: dense form over 4096 states; use the sparse triplets");
    dmatrix t(n, n, 0.0);
    for (std::size_t q = 0; q < n; ++q)
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
            t(q, m.successor(q, s)) += m.emission(q, s);
    return t;
}

/// Nonzero transition entries as (from, to, probability), ordered by
/// (from, to). This is the serialized form of the transition matrix.
inline std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>
transition_triplets(const dmarkov_model& m) {
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> out;
    out.reserve(m.state_count() * m.alphabet_size);
    for (std::size_t q = 0; q < m.state_count(); ++q)
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s)
            if (m.emission(q, s) > 0.0)
                out.emplace_back(static_cast<std::uint32_t>(q),
                                 static_cast<std::uint32_t>(m.successor(q, s)), m.emission(q, s));
    return out;
}

/// Simulate n symbols starting from the given word index. The state advances
/// by the shift rule after every emission; the returned sequence holds the
/// emitted symbols only.
inline symbol_sequence generate(const dmarkov_model& m, std::size_t initial_state, std::size_t n,
                                std::uint64_t seed) {
    if (initial_state >= m.state_count())
        throw error(errc::invalid_argument, "generate: initial state out of range");
    uniform_stream rng(seed);
    std::vector<std::uint8_t> out;
    out.reserve(n);
    std::size_t state = initial_state;
    for (std::size_t k = 0; k < n; ++k) {
        const auto s = static_cast<std::uint32_t>(sample_category(m.emission.row(state), rng.next()));
        out.push_back(static_cast<std::uint8_t>(s));
        state = m.successor(state, s);
    }
    return symbol_sequence::single_segment(std::move(out), m.alphabet_size);
}

/// Log-likelihood of a sequence under the model: per segment, each symbol
/// after the first D is scored against its word-conditional row. Computed
/// from the window counts (identical terms, grouped); returns -infinity if
/// an observed window has zero probability (possible only with zero prior).
inline double log_likelihood(const dmarkov_model& m, const symbol_sequence& seq) {
    if (seq.alphabet_size != m.alphabet_size)
        throw error(errc::invalid_argument, "log_likelihood: alphabet mismatch");
    const cmatrix c = count_dgrams(seq, m.depth);
    double ll = 0.0;
    for (std::size_t q = 0; q < c.rows(); ++q) {
        for (std::uint32_t s = 0; s < m.alphabet_size; ++s) {
            const auto n = c(q, s);
            if (n == 0) continue;
            const double p = m.emission(q, s);
            if (p <= 0.0) return -std::numeric_limits<double>::infinity();
            ll += static_cast<double>(n) * std::log(p);
        }
    }
    return ll;
}

} // namespace symdyn
