#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// must stay naive and separate from the library implementations they check.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mstates/corrmat.hpp"
#include "mstates/panel.hpp"
#include "mstates/rng.hpp"

namespace testutil {

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "mstates_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Wraps a bare matrix as a frame; epoch_len feeds the emerging-spectrum count.
inline mstates::CorrelationFrame make_frame(const Eigen::MatrixXd& m, std::size_t epoch_len,
                                            double epsilon = 0.0) {
    mstates::CorrelationFrame f;
    f.matrix = m;
    f.epoch.start_index = 0;
    f.epoch.end_index = epoch_len - 1;
    f.epoch.end_date = "test";
    f.epsilon = epsilon;
    return f;
}

// Uniform off-diagonal correlation c, unit diagonal.
inline Eigen::MatrixXd uniform_offdiag(Eigen::Index n, double c) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, c);
    m.diagonal().setOnes();
    return m;
}

inline mstates::ReturnPanel random_return_panel(Eigen::Index n, Eigen::Index t,
                                                std::uint64_t seed) {
    mstates::ReturnPanel panel;
    for (Eigen::Index k = 0; k < n; ++k) panel.tickers.push_back("T" + std::to_string(k + 1));
    for (Eigen::Index j = 0; j < t; ++j) panel.dates.push_back("d" + std::to_string(j));
    panel.returns.resize(n, t);
    mstates::Rng rng(seed);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < t; ++j) panel.returns(k, j) = 0.02 * rng.next_gaussian();
    return panel;
}

// One-factor return panel: every pair correlates positively, giving frames a
// dominant top eigenvalue like a market frame.
inline mstates::ReturnPanel factor_return_panel(Eigen::Index n, Eigen::Index t, double loading,
                                                std::uint64_t seed) {
    mstates::ReturnPanel panel = random_return_panel(n, t, seed);
    mstates::Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
    for (Eigen::Index j = 0; j < t; ++j) {
        const double g = rng.next_gaussian();
        for (Eigen::Index k = 0; k < n; ++k) panel.returns(k, j) += loading * 0.02 * g;
    }
    return panel;
}

// A generic valid correlation frame estimated from random returns.
inline mstates::CorrelationFrame random_frame(Eigen::Index n, Eigen::Index m,
                                              std::uint64_t seed) {
    const auto panel = random_return_panel(n, m, seed);
    mstates::EpochWindow w;
    w.start_index = 0;
    w.end_index = static_cast<std::size_t>(m) - 1;
    w.end_date = "test";
    return mstates::pearson_frame(panel, w);
}

// Markov-chain sampling oracle. Rows are normalized before sampling so
// published (rounded) tables form a proper distribution.
inline std::vector<int> sample_chain(const Eigen::MatrixXd& w, std::size_t steps,
                                     std::uint64_t seed, int start = 0) {
    const Eigen::Index k = w.rows();
    Eigen::MatrixXd rows = w;
    for (Eigen::Index i = 0; i < k; ++i) rows.row(i) /= rows.row(i).sum();
    mstates::Rng rng(seed);
    std::vector<int> seq;
    seq.reserve(steps);
    int state = start;
    seq.push_back(state);
    for (std::size_t t = 1; t < steps; ++t) {
        const double u = rng.next_double();
        double acc = 0.0;
        int next = static_cast<int>(k) - 1;
        for (Eigen::Index j = 0; j < k; ++j) {
            acc += rows(state, j);
            if (u < acc) {
                next = static_cast<int>(j);
                break;
            }
        }
        state = next;
        seq.push_back(state);
    }
    return seq;
}

// Reference co-occurrence tables (rows: first state; columns: next state).
inline Eigen::MatrixXd usa_table_w() {
    Eigen::MatrixXd w(4, 4);
    w << 0.869, 0.112, 0.017, 0.002,
         0.221, 0.623, 0.152, 0.004,
         0.033, 0.333, 0.575, 0.058,
         0.000, 0.000, 0.273, 0.727;
    return w;
}

inline Eigen::MatrixXd jpn_table_w() {
    Eigen::MatrixXd w(5, 5);
    w << 0.809, 0.155, 0.023, 0.009, 0.005,
         0.150, 0.634, 0.179, 0.033, 0.004,
         0.014, 0.234, 0.603, 0.120, 0.029,
         0.011, 0.075, 0.330, 0.511, 0.075,
         0.036, 0.000, 0.107, 0.393, 0.464;
    return w;
}

} // namespace testutil
