#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mstates/corrmat.hpp"
#include "mstates/error.hpp"

namespace mstates {

// =============================================================================
// Market states: clusters of correlation frames relabeled in ascending order
// of mean correlation (state 1 calmest, state k the critical state), their
// epoch-by-epoch sequence, and the Markov-chain view of the transitions.
// =============================================================================

struct StateModel {
    int k = 0;
    std::vector<int> state_of_epoch;               // 0-based state index per epoch
    std::vector<double> state_mean_corr;           // strictly ascending
    std::vector<Eigen::MatrixXd> representative_frame;  // element-wise mean of members
    std::vector<std::pair<int, int>> ties;         // state pairs whose means tied within 1e-12
};

struct TransitionMatrix {
    Eigen::MatrixXd W;          // row-stochastic; W(i,j) = P(state j follows state i)
    Eigen::MatrixXd counts;     // raw co-occurrence counts
    std::vector<int> zero_rows; // states never seen as a pair-first; their W row is zero
};

struct StationaryDistribution {
    Eigen::VectorXd p0;       // non-negative, sums to 1
    double residual = 0.0;    // max |(W^T p0 - p0)_i|; ~1e-15 for exactly stochastic W
};

// Relabels clusters so state mean correlations ascend. Frames should be the
// raw (epsilon = 0) branch so the state means live on the same scale as the
// descriptor time series. Ties are broken by earliest member epoch and
// reported in the result.
inline StateModel order_states(const std::vector<int>& labels,
                               const std::vector<CorrelationFrame>& frames,
                               MeanMode mode = MeanMode::AllElements) {
    if (labels.size() != frames.size())
        throw ValidationError("order_states: label count does not match frame count");
    if (labels.empty()) throw ValidationError("order_states: empty input");
    int k = 0;
    for (const int l : labels) {
        if (l < 0) throw ValidationError("order_states: negative cluster label");
        k = std::max(k, l + 1);
    }
    if (k < 2) throw ValidationError("order_states: need at least 2 states");

    std::vector<double> mu_sum(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    std::vector<std::size_t> first_epoch(static_cast<std::size_t>(k), labels.size());
    for (std::size_t e = 0; e < labels.size(); ++e) {
        const auto c = static_cast<std::size_t>(labels[e]);
        mu_sum[c] += mean_correlation(frames[e], mode);
        ++count[c];
        first_epoch[c] = std::min(first_epoch[c], e);
    }
    for (int c = 0; c < k; ++c)
        if (count[static_cast<std::size_t>(c)] == 0)
            throw ValidationError("order_states: cluster " + std::to_string(c) + " is empty");

    std::vector<double> mu(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c)
        mu[static_cast<std::size_t>(c)] =
            mu_sum[static_cast<std::size_t>(c)] / static_cast<double>(count[static_cast<std::size_t>(c)]);

    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ma = mu[static_cast<std::size_t>(a)];
        const double mb = mu[static_cast<std::size_t>(b)];
        if (std::abs(ma - mb) <= 1e-12)
            return first_epoch[static_cast<std::size_t>(a)] < first_epoch[static_cast<std::size_t>(b)];
        return ma < mb;
    });

    StateModel model;
    model.k = k;
    for (int s = 0; s + 1 < k; ++s) {
        const double a = mu[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])];
        const double b = mu[static_cast<std::size_t>(order[static_cast<std::size_t>(s + 1)])];
        if (std::abs(a - b) <= 1e-12) model.ties.emplace_back(s, s + 1);
    }

    std::vector<int> new_state_of_cluster(static_cast<std::size_t>(k));
    for (int s = 0; s < k; ++s)
        new_state_of_cluster[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])] = s;

    model.state_of_epoch.resize(labels.size());
    for (std::size_t e = 0; e < labels.size(); ++e)
        model.state_of_epoch[e] = new_state_of_cluster[static_cast<std::size_t>(labels[e])];

    model.state_mean_corr.resize(static_cast<std::size_t>(k));
    const Eigen::Index n = frames[0].size();
    model.representative_frame.assign(static_cast<std::size_t>(k),
                                      Eigen::MatrixXd::Zero(n, n));
    for (std::size_t e = 0; e < labels.size(); ++e)
        model.representative_frame[static_cast<std::size_t>(model.state_of_epoch[e])] +=
            frames[e].matrix;
    for (int s = 0; s < k; ++s) {
        const auto c = static_cast<std::size_t>(order[static_cast<std::size_t>(s)]);
        model.state_mean_corr[static_cast<std::size_t>(s)] = mu[c];
        model.representative_frame[static_cast<std::size_t>(s)] /= static_cast<double>(count[c]);
    }
    return model;
}

// counts(i, j) = number of consecutive pairs (i then j); W = row-normalized.
// Rows with no outgoing observation are flagged, not silently normalized.
inline TransitionMatrix transition_matrix(const std::vector<int>& seq, int k) {
    if (seq.size() < 2) throw ValidationError("transition matrix needs a sequence of length >= 2");
    if (k < 1) throw ValidationError("transition matrix needs k >= 1");
    for (const int s : seq)
        if (s < 0 || s >= k)
            throw ValidationError("state index " + std::to_string(s) + " outside [0, " +
                                  std::to_string(k) + ")");
    TransitionMatrix tm;
    tm.counts = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t t = 0; t + 1 < seq.size(); ++t)
        tm.counts(seq[t], seq[t + 1]) += 1.0;
    tm.W = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        const double row_sum = tm.counts.row(i).sum();
        if (row_sum > 0.0)
            tm.W.row(i) = tm.counts.row(i) / row_sum;
        else
            tm.zero_rows.push_back(i);
    }
    return tm;
}

namespace detail {

// Strongly connected components of the positive-entry digraph, in a form
// small enough for k ~ 10: Warshall reachability, then mutual reachability.
inline std::vector<std::vector<int>> communicating_classes(const Eigen::MatrixXd& w) {
    const int k = static_cast<int>(w.rows());
    std::vector<std::vector<bool>> reach(static_cast<std::size_t>(k),
                                         std::vector<bool>(static_cast<std::size_t>(k), false));
    for (int i = 0; i < k; ++i) {
        reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = true;
        for (int j = 0; j < k; ++j)
            if (w(i, j) > 0.0) reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
    }
    for (int via = 0; via < k; ++via)
        for (int i = 0; i < k; ++i)
            if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(via)])
                for (int j = 0; j < k; ++j)
                    if (reach[static_cast<std::size_t>(via)][static_cast<std::size_t>(j)])
                        reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;

    std::vector<int> class_of(static_cast<std::size_t>(k), -1);
    std::vector<std::vector<int>> classes;
    for (int i = 0; i < k; ++i) {
        if (class_of[static_cast<std::size_t>(i)] >= 0) continue;
        std::vector<int> members;
        for (int j = i; j < k; ++j)
            if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
                reach[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
                class_of[static_cast<std::size_t>(j)] = static_cast<int>(classes.size());
                members.push_back(j);
            }
        classes.push_back(std::move(members));
    }
    return classes;
}

inline bool class_is_closed(const Eigen::MatrixXd& w, const std::vector<int>& members) {
    std::vector<bool> in_class(static_cast<std::size_t>(w.rows()), false);
    for (const int m : members) in_class[static_cast<std::size_t>(m)] = true;
    for (const int i : members)
        for (int j = 0; j < static_cast<int>(w.cols()); ++j)
            if (!in_class[static_cast<std::size_t>(j)] && w(i, j) > 0.0) return false;
    return true;
}

inline std::string format_classes(const std::vector<std::vector<int>>& classes,
                                  const Eigen::MatrixXd& w) {
    std::string out;
    for (const auto& cls : classes) {
        if (!class_is_closed(w, cls)) continue;
        out += out.empty() ? "{" : ", {";
        for (std::size_t i = 0; i < cls.size(); ++i)
            out += (i ? ",S" : "S") + std::to_string(cls[i] + 1);
        out += "}";
    }
    return out;
}

} // namespace detail

// Fixed point of P = W^T P with sum(P) = 1, solved as a least-squares system
// stacked with the normalization row. Row sums are validated loosely
// (tables quoted to three decimals carry rounding), and the achieved residual
// is reported.
// Chains with more than one closed communicating class have no unique
// stationary distribution and are rejected.
inline StationaryDistribution stationary_distribution(const Eigen::MatrixXd& w,
                                                      double row_sum_tol = 0.01) {
    const Eigen::Index k = w.rows();
    if (k < 1 || w.cols() != k) throw ValidationError("transition matrix must be square");
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j)
            if (w(i, j) < -1e-15 || !std::isfinite(w(i, j)))
                throw ValidationError("transition probabilities must be non-negative and finite");
        const double row_sum = w.row(i).sum();
        if (row_sum == 0.0)
            throw NumericalError("state S" + std::to_string(i + 1) +
                                 " has no outgoing transitions (zero row); the chain is "
                                 "reducible and its stationary distribution is undefined");
        if (std::abs(row_sum - 1.0) > row_sum_tol)
            throw ValidationError("row " + std::to_string(i + 1) + " sums to " +
                                  fmt_double(row_sum) + ", not row-stochastic");
    }

    const auto classes = detail::communicating_classes(w);
    int closed = 0;
    for (const auto& cls : classes)
        if (detail::class_is_closed(w, cls)) ++closed;
    if (closed != 1)
        throw NumericalError("stationary distribution is not unique: " +
                             std::to_string(closed) + " closed communicating classes " +
                             detail::format_classes(classes, w));

    Eigen::MatrixXd a(k + 1, k);
    a.topRows(k) = w.transpose() - Eigen::MatrixXd::Identity(k, k);
    a.row(k).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k + 1);
    b(k) = 1.0;
    Eigen::VectorXd p = a.colPivHouseholderQr().solve(b);

    for (Eigen::Index i = 0; i < k; ++i) {
        if (p(i) < -1e-8)
            throw NumericalError("stationary solve produced a negative component: " +
                                 fmt_double(p(i)));
        p(i) = std::max(p(i), 0.0);
    }
    const double total = p.sum();
    if (!(total > 0.0)) throw NumericalError("stationary solve produced a zero vector");
    p /= total;

    StationaryDistribution out;
    out.p0 = p;
    out.residual = (w.transpose() * p - p).cwiseAbs().maxCoeff();
    return out;
}

// Occupancy fraction per state over the whole sequence.
inline Eigen::VectorXd empirical_frequencies(const std::vector<int>& seq, int k) {
    if (seq.empty()) throw ValidationError("empirical frequencies need a non-empty sequence");
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(k);
    for (const int s : seq) {
        if (s < 0 || s >= k) throw ValidationError("state index outside [0, k)");
        freq(s) += 1.0;
    }
    return freq / static_cast<double>(seq.size());
}

// Occupancy fractions over consecutive tiled blocks of `window` epochs; the
// trailing partial block keeps its own denominator. Each vector sums to 1.
inline std::vector<Eigen::VectorXd> occupancy_windows(const std::vector<int>& seq, int k,
                                                      std::size_t window) {
    if (window < 1) throw ValidationError("occupancy window must be >= 1");
    if (seq.empty()) throw ValidationError("occupancy windows need a non-empty sequence");
    std::vector<Eigen::VectorXd> out;
    for (std::size_t start = 0; start < seq.size(); start += window) {
        const std::size_t end = std::min(seq.size(), start + window);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
        for (std::size_t t = start; t < end; ++t) {
            if (seq[t] < 0 || seq[t] >= k) throw ValidationError("state index outside [0, k)");
            v(seq[t]) += 1.0;
        }
        out.push_back(v / static_cast<double>(end - start));
    }
    return out;
}

struct PrecursorEntry {
    int from_state = 0;     // 0-based
    double conditional = 0.0;  // W(from, critical)
    double joint = 0.0;        // counts(from, critical) / total transitions
};

// Inflows into the critical (highest-mean-correlation) state, ranked by
// conditional transition probability; the top entry is the precursor state.
inline std::vector<PrecursorEntry> precursor_report(const TransitionMatrix& tm) {
    const Eigen::Index k = tm.W.rows();
    if (k < 2) throw ValidationError("precursor report needs at least 2 states");
    const Eigen::Index critical = k - 1;
    const double total = tm.counts.sum();
    std::vector<PrecursorEntry> entries;
    for (Eigen::Index i = 0; i < k; ++i) {
        if (i == critical) continue;
        PrecursorEntry e;
        e.from_state = static_cast<int>(i);
        e.conditional = tm.W(i, critical);
        e.joint = total > 0.0 ? tm.counts(i, critical) / total : 0.0;
        entries.push_back(e);
    }
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.conditional > b.conditional;
    });
    return entries;
}

} // namespace mstates
