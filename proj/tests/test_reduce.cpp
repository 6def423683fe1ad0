#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include <symdyn/symdyn.hpp>

#include "helpers.hpp"

using Catch::Matchers::WithinAbs;

namespace {

/// Worked three-state fixture with rational stationary vector 1/17*(7,6,4)
/// and a hand-computed aggregation over the grouping {0,1} | {2}.
symdyn::dmarkov_model worked_fixture() {
    symdyn::dmarkov_model m;
    m.alphabet_size = 3;
    m.depth = 1;
    m.prior_weight = 0.0;
    m.emission = symdyn::dmatrix::from_rows(
        {{0.5, 0.5, 0.0}, {0.25, 0.25, 0.5}, {0.5, 0.25, 0.25}});
    m.counts = symdyn::cmatrix(3, 3, 0);
    m.stationary = symdyn::stationary_distribution(m, {}, &m.stationary_diag);
    return m;
}

symdyn::cluster_map pair_map() {
    symdyn::cluster_map f;
    f.num_clusters = 2;
    f.assignment = {0, 0, 1};
    return f;
}

} // namespace

TEST_CASE("worked aggregation fixture") {
    const auto m = worked_fixture();
    REQUIRE_THAT(m.stationary[0], WithinAbs(7.0 / 17.0, 1e-12));
    REQUIRE_THAT(m.stationary[1], WithinAbs(6.0 / 17.0, 1e-12));
    REQUIRE_THAT(m.stationary[2], WithinAbs(4.0 / 17.0, 1e-12));

    const auto f = pair_map();
    SECTION("both transition routes hit the hand-computed rationals") {
        const auto chained = symdyn::reduce_transition(m, f);
        const auto closed = symdyn::reduce_transition_closed_form(m, f);
        for (const auto* t : {&chained, &closed}) {
            REQUIRE_THAT((*t)(0, 0), WithinAbs(10.0 / 13.0, 1e-12));
            REQUIRE_THAT((*t)(0, 1), WithinAbs(3.0 / 13.0, 1e-12));
            REQUIRE_THAT((*t)(1, 0), WithinAbs(0.75, 1e-12));
            REQUIRE_THAT((*t)(1, 1), WithinAbs(0.25, 1e-12));
        }
    }
    SECTION("aggregated stationary mass and its fixed-vector property") {
        const auto pi = symdyn::aggregate_stationary(m, f);
        REQUIRE_THAT(pi[0], WithinAbs(13.0 / 17.0, 1e-12));
        REQUIRE_THAT(pi[1], WithinAbs(4.0 / 17.0, 1e-12));
        const auto t = symdyn::reduce_transition(m, f);
        REQUIRE_THAT(pi[0] * t(0, 0) + pi[1] * t(1, 0), WithinAbs(pi[0], 1e-10));
        REQUIRE_THAT(pi[0] * t(0, 1) + pi[1] * t(1, 1), WithinAbs(pi[1], 1e-10));
    }
}

TEST_CASE("pure relabelings aggregate to the exact transition matrix") {
    symdyn::uniform_stream rng(71);
    const auto m = testutil::make_model(3, 2, testutil::random_rows(rng, 9, 3));
    const auto dense = symdyn::transition_from_emission(m);

    SECTION("identity map") {
        const auto t = symdyn::reduce_transition(m, symdyn::cluster_map::identity(9));
        REQUIRE(t == dense); // bit-exact: the values are copied, not recomputed
    }
    SECTION("nontrivial permutation") {
        symdyn::cluster_map perm;
        perm.num_clusters = 9;
        perm.assignment = {4, 2, 7, 0, 8, 1, 5, 3, 6};
        const auto t = symdyn::reduce_transition(m, perm);
        for (std::size_t i = 0; i < 9; ++i)
            for (std::size_t j = 0; j < 9; ++j)
                REQUIRE(t(perm.assignment[i], perm.assignment[j]) == dense(i, j));
        const auto t2 = symdyn::reduce_transition_closed_form(m, perm);
        REQUIRE(t2 == t);
    }
}

TEST_CASE("the two aggregation routes agree on random inputs") {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        symdyn::uniform_stream rng(seed);
        const bool big = (seed % 2) == 0;
        const std::uint32_t alphabet = big ? 2 : 3;
        const std::uint32_t depth = big ? 3 : 2;
        const std::size_t nq = symdyn::state_count_for(alphabet, depth);
        const auto m = testutil::make_model(alphabet, depth,
                                            testutil::random_rows(rng, nq, alphabet));
        const std::size_t nc = 2 + static_cast<std::size_t>(rng.next() * (nq - 2));
        const auto f = testutil::random_onto_map(rng, nq, nc);

        const auto a = symdyn::reduce_transition(m, f);
        const auto b = symdyn::reduce_transition_closed_form(m, f);
        for (std::size_t i = 0; i < nc; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < nc; ++j) {
                worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
                rs += a(i, j);
            }
            REQUIRE_THAT(rs, WithinAbs(1.0, 1e-12));
        }
    }
    REQUIRE(worst <= 1e-12);
}

TEST_CASE("aggregated stationary mass is a fixed vector of the aggregate") {
    for (std::uint64_t seed : {5ull, 6ull, 7ull}) {
        symdyn::uniform_stream rng(seed);
        const auto m = testutil::make_model(3, 2, testutil::random_rows(rng, 9, 3));
        const auto f = testutil::random_onto_map(rng, 9, 4);
        const auto t = symdyn::reduce_transition(m, f);
        const auto pi = symdyn::aggregate_stationary(m, f);
        for (std::size_t j = 0; j < 4; ++j) {
            double v = 0.0;
            for (std::size_t i = 0; i < 4; ++i) v += pi[i] * t(i, j);
            REQUIRE_THAT(v, WithinAbs(pi[j], 1e-9));
        }
    }
}

TEST_CASE("emission aggregation") {
    SECTION("single-member clusters copy their rows bit-exactly") {
        symdyn::uniform_stream rng(3);
        const auto m = testutil::make_model(3, 2, testutil::random_rows(rng, 9, 3));
        const auto e = symdyn::reduce_emission(m, symdyn::cluster_map::identity(9));
        REQUIRE(e == m.emission);
    }
    SECTION("merged rows are the weighted average, frozen fixture") {
        symdyn::dmarkov_model m;
        m.alphabet_size = 2;
        m.depth = 1;
        m.emission = symdyn::dmatrix::from_rows({{0.5, 0.5}, {0.25, 0.75}});
        m.counts = symdyn::cmatrix::from_rows({{50, 50}, {25, 75}});
        m.stationary = symdyn::stationary_distribution(m, {}, &m.stationary_diag);

        symdyn::cluster_map all;
        all.num_clusters = 1;
        all.assignment = {0, 0};

        // equal visit totals: plain average, exactly representable
        const auto emp = symdyn::reduce_emission(m, all, symdyn::weighting::empirical);
        REQUIRE(emp(0, 0) == 0.375);
        REQUIRE(emp(0, 1) == 0.625);

        // stationary weights are (1/3, 2/3), giving (1/3, 2/3)
        const auto stat = symdyn::reduce_emission(m, all, symdyn::weighting::stationary);
        REQUIRE_THAT(stat(0, 0), WithinAbs(1.0 / 3.0, 1e-10));
        REQUIRE_THAT(stat(0, 1), WithinAbs(2.0 / 3.0, 1e-10));
    }
    SECTION("weighted average recomputed directly on random models") {
        symdyn::uniform_stream rng(41);
        const auto m = testutil::make_model(3, 2, testutil::random_rows(rng, 9, 3));
        const auto f = testutil::random_onto_map(rng, 9, 3);
        for (auto w : {symdyn::weighting::stationary, symdyn::weighting::empirical}) {
            const auto e = symdyn::reduce_emission(m, f, w);
            for (std::size_t c = 0; c < 3; ++c) {
                double mass = 0.0;
                std::vector<double> acc(3, 0.0);
                for (std::size_t q = 0; q < 9; ++q) {
                    if (f.assignment[q] != c) continue;
                    double wq = 0.0;
                    if (w == symdyn::weighting::stationary) {
                        wq = m.stationary[q];
                    } else {
                        for (std::uint32_t s = 0; s < 3; ++s)
                            wq += static_cast<double>(m.counts(q, s));
                    }
                    mass += wq;
                    for (std::uint32_t s = 0; s < 3; ++s) acc[s] += wq * m.emission(q, s);
                }
                for (std::uint32_t s = 0; s < 3; ++s)
                    REQUIRE_THAT(e(c, s), WithinAbs(acc[s] / mass, 1e-13));
            }
        }
    }
}

TEST_CASE("weightless clusters become uniform and are reported") {
    SECTION("empty cluster label") {
        symdyn::uniform_stream rng(13);
        const auto m = testutil::make_model(2, 1, testutil::random_rows(rng, 2, 2));
        symdyn::cluster_map f;
        f.num_clusters = 3; // label 1 is never used
        f.assignment = {0, 2};
        std::vector<std::uint32_t> flagged;
        const auto t = symdyn::reduce_transition(m, f, &flagged);
        REQUIRE(flagged == std::vector<std::uint32_t>{1});
        REQUIRE_THAT(t(1, 0), WithinAbs(1.0 / 3.0, 1e-15));
        flagged.clear();
        const auto e = symdyn::reduce_emission(m, f, symdyn::weighting::stationary, &flagged);
        REQUIRE(flagged == std::vector<std::uint32_t>{1});
        REQUIRE_THAT(e(1, 0), WithinAbs(0.5, 1e-15));
    }
    SECTION("cluster of unreachable states has no stationary mass") {
        // everything falls into state 0; states 1 and 2 have stationary zero
        const auto m = testutil::make_model(
            3, 1, {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}}, 100);
        symdyn::cluster_map f;
        f.num_clusters = 2;
        f.assignment = {0, 1, 1};
        std::vector<std::uint32_t> flagged;
        const auto e = symdyn::reduce_emission(m, f, symdyn::weighting::stationary, &flagged);
        REQUIRE(flagged == std::vector<std::uint32_t>{1});
        REQUIRE_THAT(e(1, 1), WithinAbs(1.0 / 3.0, 1e-15));
        // empirical weighting has counts for those states, so no report
        flagged.clear();
        const auto emp = symdyn::reduce_emission(m, f, symdyn::weighting::empirical, &flagged);
        REQUIRE(flagged.empty());
        REQUIRE_THAT(emp(1, 0), WithinAbs(1.0, 1e-15));
    }
}

TEST_CASE("exactly mergeable machines aggregate to their quotient") {
    const auto m = testutil::make_lumpable_model();
    symdyn::cluster_map f;
    f.num_clusters = 3;
    f.assignment.resize(9);
    for (std::size_t q = 0; q < 9; ++q) f.assignment[q] = static_cast<std::uint32_t>(q % 3);

    const auto& truth = testutil::lumpable_rows();
    const auto r = symdyn::build_reduced_model(m, f);
    REQUIRE(r.num_states() == 3);
    REQUIRE(r.zero_mass_clusters.empty());
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < 3; ++j) {
            REQUIRE_THAT(r.transition(c, j), WithinAbs(truth[c][j], 1e-12));
            REQUIRE_THAT(r.emission(c, j), WithinAbs(truth[c][j], 1e-12));
        }
    // uniform symbol marginal: each cluster carries mass 1/3
    for (std::size_t c = 0; c < 3; ++c) REQUIRE_THAT(r.stationary[c], WithinAbs(1.0 / 3.0, 1e-10));
    REQUIRE(r.alphabet_size == 3);
    REQUIRE(r.source_depth == 2);
    REQUIRE(r.map.assignment == f.assignment);
}

TEST_CASE("assembled reduced model deduplicates weightless reports") {
    symdyn::uniform_stream rng(19);
    const auto m = testutil::make_model(2, 1, testutil::random_rows(rng, 2, 2));
    symdyn::cluster_map f;
    f.num_clusters = 3;
    f.assignment = {2, 0}; // label 1 unused -> flagged by both passes
    const auto r = symdyn::build_reduced_model(m, f);
    REQUIRE(r.zero_mass_clusters == std::vector<std::uint32_t>{1});
}

TEST_CASE("cluster map validation") {
    symdyn::uniform_stream rng(23);
    const auto m = testutil::make_model(2, 1, testutil::random_rows(rng, 2, 2));
    symdyn::cluster_map bad;
    bad.num_clusters = 2;
    bad.assignment = {0};
    REQUIRE_THROWS_AS(symdyn::reduce_transition(m, bad), symdyn::error);
    bad.assignment = {0, 5};
    REQUIRE_THROWS_AS(symdyn::reduce_emission(m, bad), symdyn::error);
}

TEST_CASE("projected log-likelihood") {
    const auto m9 = testutil::make_lumpable_model();
    const auto seq = symdyn::generate(m9, 0, 3000, 77);
    const auto m = symdyn::estimate_model(seq, 2, 0.0);

    SECTION("grouped evaluation equals a symbol-by-symbol pass") {
        symdyn::cluster_map f;
        f.num_clusters = 3;
        f.assignment.resize(9);
        for (std::size_t q = 0; q < 9; ++q) f.assignment[q] = static_cast<std::uint32_t>(q % 3);
        const auto rows = symdyn::reduce_emission(m, f, symdyn::weighting::empirical);

        double stepped = 0.0;
        const auto sym = seq.segment(0);
        std::size_t state = static_cast<std::size_t>(sym[0]) * 3 + sym[1];
        for (std::size_t k = 2; k < sym.size(); ++k) {
            stepped += std::log(rows(f.assignment[state], sym[k]));
            state = m.successor(state, sym[k]);
        }
        const double grouped = symdyn::reduced_log_likelihood(m, f, seq, rows);
        REQUIRE_THAT(grouped, WithinAbs(stepped, 1e-8));
    }
    SECTION("identity projection scores exactly like the full model") {
        const auto f = symdyn::cluster_map::identity(9);
        REQUIRE(symdyn::reduced_log_likelihood(m, f, seq, symdyn::weighting::empirical)
                == symdyn::log_likelihood(m, seq));
    }
    SECTION("maximum-likelihood rows make coarser cuts monotonically worse") {
        const auto smoothed = symdyn::estimate_model(seq, 2, 1.0);
        const auto tree = symdyn::hierarchical_cluster(symdyn::pairwise_kl_distance(smoothed));
        double prev = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k <= 9; ++k) {
            const auto f = symdyn::cut(tree, k);
            const double ll = symdyn::reduced_log_likelihood(m, f, seq, symdyn::weighting::empirical);
            REQUIRE(ll >= prev - 1e-9 * std::abs(prev));
            prev = ll;
        }
    }
    SECTION("zero projected probability yields minus infinity") {
        symdyn::dmatrix rows(1, 3, 0.0);
        rows(0, 0) = 1.0; // symbols 1 and 2 impossible under the projection
        symdyn::cluster_map one;
        one.num_clusters = 1;
        one.assignment.assign(9, 0);
        REQUIRE(symdyn::reduced_log_likelihood(m, one, seq, rows)
                == -std::numeric_limits<double>::infinity());
    }
    SECTION("alphabet mismatch is rejected") {
        const auto two = symdyn::symbol_sequence::single_segment({0, 1, 0, 1}, 2);
        REQUIRE_THROWS_AS(
            symdyn::reduced_log_likelihood(m, symdyn::cluster_map::identity(9), two,
                                           symdyn::weighting::empirical),
            symdyn::error);
    }
}
