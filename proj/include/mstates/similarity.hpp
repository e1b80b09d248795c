#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mstates/corrmat.hpp"
#include "mstates/error.hpp"
#include "mstates/parallel.hpp"

namespace mstates {

// =============================================================================
// Distances between stocks inside one frame, and the zeta similarity measure
// between whole frames across epochs.
// =============================================================================

struct DistanceMatrix {
    Eigen::MatrixXd matrix;   // N x N, zero diagonal, entries in [0, 2]
    EpochWindow epoch;
    double epsilon = 0.0;
};

struct SimilarityMatrix {
    Eigen::MatrixXd matrix;              // n x n, zero diagonal, entries in [0, 2]
    std::vector<std::string> end_dates;  // length n
    double epsilon = 0.0;

    Eigen::Index size() const { return matrix.rows(); }
};

enum class ZetaMode {
    AllElements,   // mean |difference| over all N^2 elements
    OffDiagonal,
};

// d_ij = sqrt(2 (1 - C_ij)); identical stocks at 0, perfect anticorrelation at 2.
inline DistanceMatrix stock_distances(const CorrelationFrame& frame) {
    DistanceMatrix d;
    d.epoch = frame.epoch;
    d.epsilon = frame.epsilon;
    d.matrix = frame.matrix.unaryExpr(
        [](double c) { return std::sqrt(std::max(0.0, 2.0 * (1.0 - c))); });
    d.matrix.diagonal().setZero();
    return d;
}

// zeta(a, b) = mean elementwise |a_ij - b_ij|.
inline double frame_similarity(const CorrelationFrame& a, const CorrelationFrame& b,
                               ZetaMode mode = ZetaMode::AllElements) {
    if (a.size() != b.size())
        throw ValidationError("frame similarity: dimension mismatch (" +
                              std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    if (a.epsilon != b.epsilon)
        throw ValidationError("frame similarity: epsilon mismatch (" + fmt_double(a.epsilon) +
                              " vs " + fmt_double(b.epsilon) + ")");
    const auto n = static_cast<double>(a.size());
    const double sum = (a.matrix - b.matrix).cwiseAbs().sum();
    if (mode == ZetaMode::AllElements) return sum / (n * n);
    return sum / (n * n - n);  // diagonals are both exactly 1, so they contribute 0
}

inline SimilarityMatrix similarity_matrix(const std::vector<CorrelationFrame>& frames,
                                          unsigned workers = 1,
                                          ZetaMode mode = ZetaMode::AllElements) {
    const std::size_t n = frames.size();
    if (n == 0) throw ValidationError("similarity matrix needs at least one frame");
    for (std::size_t i = 1; i < n; ++i) {
        if (frames[i].size() != frames[0].size() || frames[i].epsilon != frames[0].epsilon)
            throw ValidationError("heterogeneous frame list at index " + std::to_string(i) +
                                  " (N or epsilon differs)");
    }
    SimilarityMatrix sim;
    sim.epsilon = frames[0].epsilon;
    sim.end_dates.reserve(n);
    for (const auto& f : frames) sim.end_dates.push_back(f.epoch.end_date);
    sim.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(n));

    // One work item per unordered pair, so the split is balanced regardless
    // of worker count; each entry has exactly one writer.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::uint32_t p = 0; p + 1 < n; ++p)
        for (std::uint32_t q = p + 1; q < n; ++q) pairs.emplace_back(p, q);
    parallel_for(pairs.size(), workers, [&](std::size_t t) {
        const auto [p, q] = pairs[t];
        sim.matrix(p, q) = frame_similarity(frames[p], frames[q], mode);
    });
    sim.matrix = sim.matrix.selfadjointView<Eigen::Upper>();
    sim.matrix.diagonal().setZero();
    return sim;
}

// -----------------------------------------------------------------------------
// Binary cache: 16-byte header (4-byte magic "ZSIM", uint32 n, IEEE-754 double
// epsilon), then n*n doubles row-major. Little-endian, native doubles.
// -----------------------------------------------------------------------------

inline constexpr char kSimilarityMagic[4] = {'Z', 'S', 'I', 'M'};

inline void save_similarity_cache(const std::filesystem::path& path,
                                  const SimilarityMatrix& sim) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write similarity cache: " + path.string());
    const auto n = static_cast<std::uint32_t>(sim.size());
    out.write(kSimilarityMagic, 4);
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&sim.epsilon), sizeof(double));
    for (Eigen::Index i = 0; i < sim.matrix.rows(); ++i)
        for (Eigen::Index j = 0; j < sim.matrix.cols(); ++j) {
            const double v = sim.matrix(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
    if (!out) throw Error("write failed: " + path.string());
}

// Returns the cached matrix (dates are not stored; the caller reattaches them),
// or nullopt when the file is absent or malformed.
inline std::optional<SimilarityMatrix> load_similarity_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[4];
    std::uint32_t n = 0;
    double epsilon = 0.0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    in.read(reinterpret_cast<char*>(&epsilon), sizeof(double));
    if (!in || std::memcmp(magic, kSimilarityMagic, 4) != 0) return std::nullopt;
    SimilarityMatrix sim;
    sim.epsilon = epsilon;
    sim.matrix.resize(n, n);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(double));
            if (!in) return std::nullopt;
            sim.matrix(i, j) = v;
        }
    return sim;
}

} // namespace mstates
