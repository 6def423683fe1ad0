#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "matrix.hpp"

namespace symdyn {

struct depth_estimate {
    std::uint32_t depth = 1;
    bool capped = false; ///< spectral criterion not met by max_depth; value clamped
    std::vector<double> magnitudes; ///< eigenvalue magnitudes, descending
    /// Two eigenvalues coincide (within 1e-9); the matrix may be defective,
    /// in which case the pure-magnitude decay argument is only approximate.
    bool repeated_eigenvalues = false;
};

namespace detail {

inline std::vector<std::complex<double>> complex_eigenvalues(const dmatrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw error(errc::invalid_argument, "eigenvalue_magnitudes: matrix must be square and nonempty");
    if (a.rows() > 64)
        throw error(errc::invalid_argument, "eigenvalue_magnitudes: matrix larger than 64x64");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(i, j);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw no_convergence_error("eigenvalue_magnitudes: eigensolver failed to converge");
    std::vector<std::complex<double>> ev(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) ev[i] = solver.eigenvalues()[static_cast<Eigen::Index>(i)];
    return ev;
}

} // namespace detail

/// Eigenvalue magnitudes of a square matrix, sorted descending. Intended for
/// one-step symbol matrices, which are small; refuses anything above 64x64.
inline std::vector<double> eigenvalue_magnitudes(const dmatrix& a) {
    const auto ev = detail::complex_eigenvalues(a);
    std::vector<double> mags(ev.size());
    std::transform(ev.begin(), ev.end(), mags.begin(), [](auto z) { return std::abs(z); });
    std::sort(mags.begin(), mags.end(), std::greater<>());
    return mags;
}

/// Smallest D >= depth_floor such that the non-leading magnitudes satisfy
/// sum_j |lambda_j|^(D+1) < epsilon, i.e. correlations carried by words
/// longer than D fall below epsilon. Clamped to max_depth when the spectrum
/// decays too slowly (or not at all).
inline std::pair<std::uint32_t, bool> depth_from_magnitudes(std::span<const double> magnitudes,
                                                            double epsilon,
                                                            std::uint32_t max_depth = 8,
                                                            std::uint32_t depth_floor = 1) {
    if (epsilon <= 0.0)
        throw error(errc::invalid_argument, "depth_from_magnitudes: epsilon must be positive");
    if (depth_floor < 1 || max_depth < depth_floor)
        throw error(errc::invalid_argument, "depth_from_magnitudes: need 1 <= depth_floor <= max_depth");
    for (std::size_t j = 1; j < magnitudes.size(); ++j) {
        if (magnitudes[j] >= 1.0 - 1e-9) return {max_depth, true}; // non-decaying mode
    }
    for (std::uint32_t d = depth_floor; d <= max_depth; ++d) {
        double tail = 0.0;
        for (std::size_t j = 1; j < magnitudes.size(); ++j)
            tail += std::pow(magnitudes[j], static_cast<double>(d) + 1.0);
        if (tail < epsilon) return {d, false};
    }
    return {max_depth, true};
}

/// Estimate the word length needed to summarize the memory of the symbol
/// stream, from the spectrum of its one-step symbol transition matrix.
inline depth_estimate estimate_depth(const dmatrix& one_step, double epsilon,
                                     std::uint32_t max_depth = 8, std::uint32_t depth_floor = 1) {
    const auto ev = detail::complex_eigenvalues(one_step);

    depth_estimate est;
    est.magnitudes.resize(ev.size());
    std::transform(ev.begin(), ev.end(), est.magnitudes.begin(), [](auto z) { return std::abs(z); });
    std::sort(est.magnitudes.begin(), est.magnitudes.end(), std::greater<>());

    auto [d, capped] = depth_from_magnitudes(est.magnitudes, epsilon, max_depth, depth_floor);
    est.depth = d;
    est.capped = capped;

    if (one_step.rows() > 2) {
        for (std::size_t i = 0; i < ev.size() && !est.repeated_eigenvalues; ++i)
            for (std::size_t j = i + 1; j < ev.size(); ++j)
                if (std::abs(ev[i] - ev[j]) < 1e-9) { est.repeated_eigenvalues = true; break; }
    }
    return est;
}

} // namespace symdyn
