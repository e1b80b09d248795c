#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mstates/corrmat.hpp"
#include "mstates/error.hpp"

namespace mstates {

// =============================================================================
// Eigenvalue analysis of correlation frames. Raw frames estimated from M < N
// returns are singular with at least N-M+1 zero eigenvalues; the power map
// breaks that degeneracy into the "emerging spectrum" around zero.
// =============================================================================

struct Spectrum {
    Eigen::VectorXd eigenvalues;       // ascending
    std::size_t zero_count = 0;        // |lambda| < tol
    double lambda_max = 0.0;
    std::vector<double> emerging;      // ascending; the N-M+1 smallest-|lambda|
                                       // eigenvalues, populated for eps > 0 frames
    double tol = 0.0;
};

// Floating-point eigensolvers return ~1e-14-scale noise at zero, so the
// degeneracy tolerance scales with N.
inline double default_degeneracy_tol(Eigen::Index n) {
    return 1e-10 * static_cast<double>(n);
}

inline Spectrum spectrum(const CorrelationFrame& frame, double tol) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(frame.matrix);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed to converge on frame ending " +
                             frame.epoch.end_date);
    Spectrum s;
    s.tol = tol;
    s.eigenvalues = solver.eigenvalues();
    s.lambda_max = s.eigenvalues(s.eigenvalues.size() - 1);
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
        if (std::abs(s.eigenvalues(i)) < tol) ++s.zero_count;

    // Emerging-spectrum membership is by count, not threshold: the N-M+1
    // smallest-magnitude eigenvalues, defined only after noise suppression.
    const auto n = static_cast<std::ptrdiff_t>(frame.size());
    const auto m = static_cast<std::ptrdiff_t>(frame.epoch.length());
    if (frame.epsilon > 0.0 && n - m + 1 > 0) {
        const auto count = static_cast<std::size_t>(n - m + 1);
        std::vector<std::size_t> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(s.eigenvalues(static_cast<Eigen::Index>(a))) <
                   std::abs(s.eigenvalues(static_cast<Eigen::Index>(b)));
        });
        s.emerging.reserve(count);
        for (std::size_t i = 0; i < count && i < order.size(); ++i)
            s.emerging.push_back(s.eigenvalues(static_cast<Eigen::Index>(order[i])));
        std::sort(s.emerging.begin(), s.emerging.end());
    }
    return s;
}

inline Spectrum spectrum(const CorrelationFrame& frame) {
    return spectrum(frame, default_degeneracy_tol(frame.size()));
}

struct SweepPoint {
    double epsilon;
    double lambda_max;
    double mean_correlation;
};

// lambda_max and mu of the power-mapped frame for each exponent; the frame
// must be raw so each point maps the same input.
inline std::vector<SweepPoint> epsilon_sweep(const CorrelationFrame& frame,
                                             const std::vector<double>& eps_list,
                                             MeanMode mode = MeanMode::AllElements) {
    if (frame.epsilon != 0.0)
        throw ValidationError("epsilon sweep requires a raw (epsilon=0) frame");
    std::vector<SweepPoint> out;
    out.reserve(eps_list.size());
    for (const double eps : eps_list) {
        const CorrelationFrame mapped = power_map(frame, eps);
        const Spectrum s = spectrum(mapped, default_degeneracy_tol(mapped.size()));
        out.push_back({eps, s.lambda_max, mean_correlation(mapped, mode)});
    }
    return out;
}

} // namespace mstates
