#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <symdyn/symdyn.hpp>

#include "helpers.hpp"

using Catch::Matchers::WithinAbs;

namespace {

/// Literal transcription of the tail criterion, evaluated by scanning all
/// candidate depths with pow, for cross-checking the library's scan.
std::uint32_t tail_scan(const std::vector<double>& mags, double eps, std::uint32_t dmax) {
    for (std::uint32_t d = 1; d <= dmax; ++d) {
        double tail = 0.0;
        for (std::size_t j = 1; j < mags.size(); ++j) tail += std::pow(mags[j], d + 1.0);
        if (tail < eps) return d;
    }
    return dmax;
}

} // namespace

TEST_CASE("word-length rule on frozen spectra") {
    SECTION("single slow mode 0.8 needs 13-symbol words at 0.05") {
        const auto [d, capped] = symdyn::depth_from_magnitudes(std::vector<double>{1.0, 0.8}, 0.05, 20);
        REQUIRE(d == 13);
        REQUIRE_FALSE(capped);
        // 0.8^14 = 0.0440 < 0.05 <= 0.8^13 = 0.0550
        REQUIRE(std::pow(0.8, 14.0) < 0.05);
        REQUIRE(std::pow(0.8, 13.0) >= 0.05);
    }
    SECTION("modes 0.6 and 0.3 need 6-symbol correlations to die") {
        const auto [d, capped] = symdyn::depth_from_magnitudes(std::vector<double>{1.0, 0.6, 0.3}, 0.05, 20);
        REQUIRE(d == 5);
        REQUIRE_FALSE(capped);
        REQUIRE(std::pow(0.6, 6.0) + std::pow(0.3, 6.0) < 0.05);
        REQUIRE(std::pow(0.6, 5.0) + std::pow(0.3, 5.0) >= 0.05);
    }
    SECTION("modes 0.3 and 0.1 give depth two at 0.05 and three at 0.02") {
        const std::vector<double> mags = {1.0, 0.3, 0.1};
        REQUIRE(symdyn::depth_from_magnitudes(mags, 0.05).first == 2);
        REQUIRE(symdyn::depth_from_magnitudes(mags, 0.02).first == 3);
        // margins: 0.10 >= 0.05 > 0.028 and 0.028 >= 0.02 > 0.0082
        REQUIRE_THAT(0.3 * 0.3 + 0.1 * 0.1, WithinAbs(0.10, 1e-15));
        REQUIRE_THAT(std::pow(0.3, 3.0) + std::pow(0.1, 3.0), WithinAbs(0.028, 1e-15));
    }
    SECTION("random spectra agree with an independent scan") {
        symdyn::uniform_stream rng(444);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> mags = {1.0};
            const std::size_t extra = 1 + static_cast<std::size_t>(rng.next() * 4);
            for (std::size_t j = 0; j < extra; ++j) mags.push_back(0.95 * rng.next());
            std::sort(mags.begin(), mags.end(), std::greater<>());
            const double eps = 0.005 + 0.1 * rng.next();
            const auto [d, capped] = symdyn::depth_from_magnitudes(mags, eps, 12);
            REQUIRE(d == tail_scan(mags, eps, 12));
            if (!capped) {
                double tail = 0.0;
                for (std::size_t j = 1; j < mags.size(); ++j) tail += std::pow(mags[j], d + 1.0);
                REQUIRE(tail < eps);
            }
        }
    }
}

TEST_CASE("word-length rule edge behavior") {
    SECTION("memoryless spectrum takes the floor immediately") {
        REQUIRE(symdyn::depth_from_magnitudes(std::vector<double>{1.0, 0.0}, 0.05).first == 1);
        REQUIRE(symdyn::depth_from_magnitudes(std::vector<double>{1.0}, 0.05).first == 1);
    }
    SECTION("floor pushes the answer up, never down") {
        const std::vector<double> mags = {1.0, 0.3, 0.1}; // natural answer 2
        const auto [d, capped] = symdyn::depth_from_magnitudes(mags, 0.05, 8, 4);
        REQUIRE(d == 4);
        REQUIRE_FALSE(capped);
    }
    SECTION("slow decay clamps at the maximum with the capped flag") {
        const auto [d, capped] = symdyn::depth_from_magnitudes(std::vector<double>{1.0, 0.8}, 0.05, 8);
        REQUIRE(d == 8);
        REQUIRE(capped);
    }
    SECTION("a second unit-magnitude mode can never satisfy the criterion") {
        const auto [d, capped] =
            symdyn::depth_from_magnitudes(std::vector<double>{1.0, 1.0 - 1e-12}, 0.05, 8);
        REQUIRE(d == 8);
        REQUIRE(capped);
    }
    SECTION("parameter validation") {
        const std::vector<double> mags = {1.0, 0.5};
        REQUIRE_THROWS_AS(symdyn::depth_from_magnitudes(mags, 0.0), symdyn::error);
        REQUIRE_THROWS_AS(symdyn::depth_from_magnitudes(mags, -0.1), symdyn::error);
        REQUIRE_THROWS_AS(symdyn::depth_from_magnitudes(mags, 0.05, 8, 0), symdyn::error);
        REQUIRE_THROWS_AS(symdyn::depth_from_magnitudes(mags, 0.05, 3, 4), symdyn::error);
    }
}

TEST_CASE("eigenvalue magnitudes of known matrices") {
    SECTION("the lumpable row table has magnitudes 1, 0.3, 0.1") {
        const auto t = symdyn::dmatrix::from_rows(testutil::lumpable_rows());
        // determinant checks certify 0.1 and -0.3 really are eigenvalues
        auto shifted = t;
        for (int i = 0; i < 3; ++i) shifted(i, i) -= 0.1;
        REQUIRE_THAT(testutil::det3(shifted), WithinAbs(0.0, 1e-12));
        shifted = t;
        for (int i = 0; i < 3; ++i) shifted(i, i) += 0.3;
        REQUIRE_THAT(testutil::det3(shifted), WithinAbs(0.0, 1e-12));

        const auto mags = symdyn::eigenvalue_magnitudes(t);
        REQUIRE(mags.size() == 3);
        REQUIRE_THAT(mags[0], WithinAbs(1.0, 1e-10));
        REQUIRE_THAT(mags[1], WithinAbs(0.3, 1e-10));
        REQUIRE_THAT(mags[2], WithinAbs(0.1, 1e-10));

        // symmetric matrix: sum of squared magnitudes equals trace of T^2
        double tr2 = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) tr2 += t(i, j) * t(j, i);
        REQUIRE_THAT(mags[0] * mags[0] + mags[1] * mags[1] + mags[2] * mags[2],
                     WithinAbs(tr2, 1e-10));
    }
    SECTION("circulant with a complex pair") {
        // rows are rotations of (0.7, 0.2, 0.1); the non-leading eigenvalues
        // are a conjugate pair of magnitude sqrt(0.31)
        const auto c = symdyn::dmatrix::from_rows(
            {{0.7, 0.2, 0.1}, {0.1, 0.7, 0.2}, {0.2, 0.1, 0.7}});
        const auto mags = symdyn::eigenvalue_magnitudes(c);
        REQUIRE_THAT(mags[0], WithinAbs(1.0, 1e-10));
        REQUIRE_THAT(mags[1], WithinAbs(std::sqrt(0.31), 1e-10));
        REQUIRE_THAT(mags[2], WithinAbs(std::sqrt(0.31), 1e-10));
    }
    SECTION("guards") {
        REQUIRE_THROWS_AS(symdyn::eigenvalue_magnitudes(symdyn::dmatrix(2, 3, 0.1)), symdyn::error);
        REQUIRE_THROWS_AS(symdyn::eigenvalue_magnitudes(symdyn::dmatrix()), symdyn::error);
        REQUIRE_THROWS_AS(symdyn::eigenvalue_magnitudes(symdyn::dmatrix(65, 65, 1.0 / 65.0)),
                          symdyn::error);
    }
}

TEST_CASE("full spectral depth estimate") {
    SECTION("lumpable table: depth 2 at 0.05, depth 3 at 0.02") {
        const auto t = symdyn::dmatrix::from_rows(testutil::lumpable_rows());
        const auto loose = symdyn::estimate_depth(t, 0.05);
        REQUIRE(loose.depth == 2);
        REQUIRE_FALSE(loose.capped);
        REQUIRE_FALSE(loose.repeated_eigenvalues);
        REQUIRE(loose.magnitudes.size() == 3);
        const auto tight = symdyn::estimate_depth(t, 0.02);
        REQUIRE(tight.depth == 3);
        REQUIRE_FALSE(tight.capped);
    }
    SECTION("circulant closed form") {
        const auto c = symdyn::dmatrix::from_rows(
            {{0.7, 0.2, 0.1}, {0.1, 0.7, 0.2}, {0.2, 0.1, 0.7}});
        const auto est = symdyn::estimate_depth(c, 0.05, 20);
        // tail(D+1) = 2 * 0.31^((D+1)/2): first below 0.05 at D+1 = 7
        std::uint32_t expect = 0;
        for (std::uint32_t d = 1; d <= 20; ++d)
            if (2.0 * std::pow(0.31, (d + 1.0) / 2.0) < 0.05) { expect = d; break; }
        REQUIRE(expect == 6);
        REQUIRE(est.depth == expect);
        REQUIRE_FALSE(est.capped);
    }
    SECTION("identity has no decaying modes and a repeated spectrum") {
        symdyn::dmatrix eye(3, 3, 0.0);
        for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
        const auto est = symdyn::estimate_depth(eye, 0.05, 8);
        REQUIRE(est.depth == 8);
        REQUIRE(est.capped);
        REQUIRE(est.repeated_eigenvalues);
    }
    SECTION("2x2 matrices never raise the repeated-spectrum flag") {
        const auto t = symdyn::dmatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
        const auto est = symdyn::estimate_depth(t, 0.05);
        REQUIRE(est.depth == 1);
        REQUIRE_FALSE(est.repeated_eigenvalues);
    }
}
