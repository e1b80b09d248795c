#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mstates/error.hpp"
#include "mstates/panel.hpp"

namespace mstates {

// =============================================================================
// Epoch-wise Pearson cross-correlation frames, the power-map distortion
// C -> sign(C) |C|^(1+eps), and scalar frame descriptors.
// =============================================================================

struct CorrelationFrame {
    Eigen::MatrixXd matrix;   // N x N, symmetric, unit diagonal, entries in [-1, 1]
    EpochWindow epoch;
    double epsilon = 0.0;     // 0 means raw

    Eigen::Index size() const { return matrix.rows(); }
};

enum class MeanMode {
    AllElements,   // mean over all N^2 entries, diagonal included
    OffDiagonal,   // mean over the N^2 - N off-diagonal entries
};

struct FrameDescriptor {
    std::string end_date;
    double mean_correlation = 0.0;
    std::optional<double> gini;         // undefined when the coefficient mean is <= 0
    double lambda_max = 0.0;            // filled from the spectrum
};

// Pearson coefficients over the M in-epoch returns, biased (divide-by-M)
// moments. The M vs M-1 choice cancels in the ratio.
inline CorrelationFrame pearson_frame(const ReturnPanel& returns, const EpochWindow& epoch) {
    const Eigen::Index n = returns.n_stocks();
    const auto m = static_cast<Eigen::Index>(epoch.length());
    if (epoch.end_index >= static_cast<std::size_t>(returns.n_days()))
        throw ValidationError("epoch end index " + std::to_string(epoch.end_index) +
                              " out of range");
    if (m < 2) throw ValidationError("epoch must contain at least 2 return days");

    Eigen::MatrixXd block =
        returns.returns.block(0, static_cast<Eigen::Index>(epoch.start_index), n, m);
    const Eigen::VectorXd mean = block.rowwise().mean();
    block.colwise() -= mean;
    Eigen::VectorXd sd(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        sd(k) = std::sqrt(block.row(k).squaredNorm() / static_cast<double>(m));
        // Variance indistinguishable from zero at double precision: a constant
        // return series leaves only rounding residue around its mean.
        if (!(sd(k) > 0.0) || sd(k) < 1e-13 * std::abs(mean(k)))
            throw NumericalError("zero return variance for ticker " +
                                 returns.tickers[static_cast<std::size_t>(k)] + " in epoch ending " +
                                 (epoch.end_date.empty() ? ("#" + std::to_string(epoch.end_index))
                                                         : epoch.end_date));
        block.row(k) /= sd(k);
    }

    CorrelationFrame frame;
    frame.epoch = epoch;
    frame.epsilon = 0.0;
    frame.matrix.noalias() = (block * block.transpose()) / static_cast<double>(m);
    // Enforce the frame invariants exactly: symmetry, range, unit diagonal.
    frame.matrix = ((frame.matrix + frame.matrix.transpose()) * 0.5).eval();
    frame.matrix = frame.matrix.cwiseMax(-1.0).cwiseMin(1.0);
    frame.matrix.diagonal().setOnes();
    return frame;
}

// Noise suppression: each entry -> sign(C) |C|^(1+eps). Only raw frames may
// be mapped; composing two maps would silently square the distortion.
inline CorrelationFrame power_map(const CorrelationFrame& frame, double epsilon) {
    if (epsilon < 0.0) throw ValidationError("noise-suppression exponent must be >= 0");
    if (frame.epsilon != 0.0)
        throw ValidationError("power map applied to an already-mapped frame (epsilon=" +
                              fmt_double(frame.epsilon) + ")");
    CorrelationFrame out;
    out.epoch = frame.epoch;
    out.epsilon = epsilon;
    if (epsilon == 0.0) {
        out.matrix = frame.matrix;
        return out;
    }
    const double exponent = 1.0 + epsilon;
    out.matrix = frame.matrix.unaryExpr([exponent](double c) {
        if (c == 0.0) return 0.0;
        const double mag = std::pow(std::abs(c), exponent);
        return c > 0.0 ? mag : -mag;
    });
    out.matrix.diagonal().setOnes();
    return out;
}

inline double mean_correlation(const CorrelationFrame& frame,
                               MeanMode mode = MeanMode::AllElements) {
    const auto n = static_cast<double>(frame.size());
    if (mode == MeanMode::AllElements) return frame.matrix.sum() / (n * n);
    // Diagonal is exactly 1 by construction.
    return (frame.matrix.sum() - n) / (n * n - n);
}

// Gini coefficient of the m = N(N-1)/2 upper-triangle coefficients:
//   g = sum_{a,b} |x_a - x_b| / (2 m^2 xbar),
// computed via the sorted form. Undefined for non-positive mean. Lies in
// [0, 1] when the population is non-negative; coefficients straddling zero
// with a small positive mean can push the ratio above 1.
inline std::optional<double> gini(const CorrelationFrame& frame) {
    const Eigen::Index n = frame.size();
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) x.push_back(frame.matrix(i, j));
    const auto m = static_cast<double>(x.size());
    if (x.empty()) return std::nullopt;
    double sum = 0.0;
    for (const double v : x) sum += v;
    const double mean = sum / m;
    if (!(mean > 0.0)) return std::nullopt;
    std::sort(x.begin(), x.end());
    // sum_{a,b} |x_a - x_b| == 2 * sum_i (2i - (m-1)) x_(i) for ascending x.
    double weighted = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        weighted += (2.0 * static_cast<double>(i) - (m - 1.0)) * x[i];
    return weighted / (m * m * mean);
}

inline FrameDescriptor describe_frame(const CorrelationFrame& frame,
                                      MeanMode mode = MeanMode::AllElements) {
    FrameDescriptor d;
    d.end_date = frame.epoch.end_date;
    d.mean_correlation = mean_correlation(frame, mode);
    d.gini = gini(frame);
    return d;
}

} // namespace mstates
