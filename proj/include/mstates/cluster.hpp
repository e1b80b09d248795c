#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mstates/error.hpp"
#include "mstates/parallel.hpp"
#include "mstates/rng.hpp"

namespace mstates {

// =============================================================================
// Seeded k-means over the MDS map, ensemble statistics of the intra-cluster
// distance across many initializations, and the optimal-k selection rule:
// the largest k whose ensemble standard deviation sits within a tolerance of
// the minimum.
// =============================================================================

enum class KMeansInit {
    Forgy,      // k distinct points as initial centroids; the default, because the
                // ensemble dispersion is the measured signal
    PlusPlus,   // available behind a flag; variance-reducing, so off by default
};

enum class IntraMode {
    PerClusterMean,  // mean point-to-centroid distance per cluster, averaged over clusters
    PooledPoints,    // mean over all points
};

struct KMeansOptions {
    int max_iterations = 300;
    KMeansInit init = KMeansInit::Forgy;
    IntraMode intra = IntraMode::PerClusterMean;
};

struct KMeansResult {
    std::vector<int> labels;      // cluster index per point, all clusters non-empty
    Eigen::MatrixXd centroids;    // k x D
    double mean_intra = 0.0;      // Euclidean point-to-centroid distance statistic
    double wcss = 0.0;            // within-cluster sum of squared distances
    int iterations = 0;
    std::uint64_t seed = 0;
};

// Within-cluster sum of squares for a given labeling, with centroids at the
// cluster means. Shared with the tests so objective comparisons are exact.
inline double kmeans_objective(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                               int k) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0)
            sums.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    double wcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        wcss += (points.row(i) - sums.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    return wcss;
}

namespace detail {

inline void assign_labels(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                          std::vector<int>& labels) {
    const Eigen::Index n = points.rows();
    const Eigen::Index k = centroids.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
        for (Eigen::Index c = 1; c < k; ++c) {
            const double d = (points.row(i) - centroids.row(c)).squaredNorm();
            if (d < best_d) {  // ties keep the lower index
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
    }
}

// Empty clusters are repaired by promoting the point farthest from its
// current centroid (from a cluster with >= 2 members) to a singleton.
inline void repair_empty_clusters(const Eigen::MatrixXd& points,
                                  const Eigen::MatrixXd& centroids, std::vector<int>& labels,
                                  int k) {
    const Eigen::Index n = points.rows();
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (const int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) continue;
        Eigen::Index donor = -1;
        double max_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int l = labels[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(l)] < 2) continue;
            const double d = (points.row(i) - centroids.row(l)).squaredNorm();
            if (d > max_d) {
                max_d = d;
                donor = i;
            }
        }
        if (donor < 0) throw NumericalError("empty-cluster repair found no donor point");
        --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(donor)])];
        labels[static_cast<std::size_t>(donor)] = c;
        counts[static_cast<std::size_t>(c)] = 1;
    }
}

inline Eigen::MatrixXd init_centroids(const Eigen::MatrixXd& points, int k, Rng& rng,
                                      KMeansInit method) {
    const auto n = static_cast<std::size_t>(points.rows());
    Eigen::MatrixXd centroids(k, points.cols());
    if (method == KMeansInit::Forgy) {
        const auto picks = rng.sample_without_replacement(n, static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c)
            centroids.row(c) = points.row(static_cast<Eigen::Index>(picks[static_cast<std::size_t>(c)]));
        return centroids;
    }
    // k-means++: D^2-weighted sampling.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    const auto first = static_cast<Eigen::Index>(rng.next_below(n));
    centroids.row(0) = points.row(first);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = (points.row(static_cast<Eigen::Index>(i)) - centroids.row(c - 1))
                                 .squaredNorm();
            d2[i] = std::min(d2[i], d);
            total += d2[i];
        }
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = rng.next_double() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = static_cast<Eigen::Index>(i);
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.next_below(n));
        }
        centroids.row(c) = points.row(pick);
    }
    return centroids;
}

} // namespace detail

// Lloyd iteration from a seeded random initialization until the labeling is
// stable or the iteration cap. Deterministic given (points, k, seed).
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                           const KMeansOptions& options = {}) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw ValidationError("k must be at least 1");
    if (static_cast<Eigen::Index>(k) > n)
        throw ValidationError("k=" + std::to_string(k) + " exceeds point count " +
                              std::to_string(n));

    Rng rng(seed);
    Eigen::MatrixXd centroids = detail::init_centroids(points, k, rng, options.init);
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    std::vector<int> prev_labels;
    double prev_wcss = std::numeric_limits<double>::infinity();
    int iterations = 0;

    while (iterations < options.max_iterations) {
        ++iterations;
        detail::assign_labels(points, centroids, labels);
        detail::repair_empty_clusters(points, centroids, labels, k);
        if (labels == prev_labels) break;
        prev_labels = labels;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
            ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c)
            centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);

        // Lloyd's objective is monotone in exact arithmetic; allow rounding slack.
        const double wcss = kmeans_objective(points, labels, k);
        if (wcss > prev_wcss + 1e-9 * (1.0 + prev_wcss))
            throw NumericalError("k-means objective increased between iterations");
        prev_wcss = wcss;
    }

    KMeansResult result;
    result.seed = seed;
    result.iterations = iterations;
    result.labels = labels;
    result.wcss = kmeans_objective(points, labels, k);

    // Final centroids are the member means of the converged labeling.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw NumericalError("k-means produced an empty cluster");
        sums.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    result.centroids = sums;

    if (options.intra == IntraMode::PerClusterMean) {
        std::vector<double> dist_sum(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int l = labels[static_cast<std::size_t>(i)];
            dist_sum[static_cast<std::size_t>(l)] += (points.row(i) - result.centroids.row(l)).norm();
        }
        double acc = 0.0;
        for (int c = 0; c < k; ++c)
            acc += dist_sum[static_cast<std::size_t>(c)] /
                   static_cast<double>(counts[static_cast<std::size_t>(c)]);
        result.mean_intra = acc / static_cast<double>(k);
    } else {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int l = labels[static_cast<std::size_t>(i)];
            acc += (points.row(i) - result.centroids.row(l)).norm();
        }
        result.mean_intra = acc / static_cast<double>(n);
    }
    return result;
}

struct EnsembleStats {
    int k = 0;
    int runs = 0;
    double mean_of_mean_intra = 0.0;
    double std_of_mean_intra = 0.0;        // sample standard deviation
    std::vector<double> per_run_mean_intra;
    std::vector<double> per_run_wcss;
    std::vector<std::uint64_t> per_run_seed;
};

// `runs` independent k-means fits with per-run seeds derived from the master
// seed; the dispersion of mean_intra across the ensemble is the signal the
// optimal-k rule reads.
inline EnsembleStats ensemble_stats(const Eigen::MatrixXd& points, int k, int runs,
                                    std::uint64_t master_seed, unsigned workers = 1,
                                    const KMeansOptions& options = {}) {
    if (runs < 2) throw ValidationError("ensemble needs at least 2 runs");
    EnsembleStats stats;
    stats.k = k;
    stats.runs = runs;
    stats.per_run_mean_intra.resize(static_cast<std::size_t>(runs));
    stats.per_run_wcss.resize(static_cast<std::size_t>(runs));
    stats.per_run_seed.resize(static_cast<std::size_t>(runs));
    parallel_for(static_cast<std::size_t>(runs), workers, [&](std::size_t r) {
        const std::uint64_t seed =
            derive_seed(master_seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r));
        const KMeansResult res = kmeans(points, k, seed, options);
        stats.per_run_mean_intra[r] = res.mean_intra;
        stats.per_run_wcss[r] = res.wcss;
        stats.per_run_seed[r] = seed;
    });
    double sum = 0.0;
    bool all_equal = true;
    for (const double v : stats.per_run_mean_intra) {
        sum += v;
        all_equal = all_equal && v == stats.per_run_mean_intra.front();
    }
    stats.mean_of_mean_intra = sum / static_cast<double>(runs);
    // Identical runs (k = 1, or a unique optimum) have exactly zero spread;
    // don't let accumulation rounding manufacture a residue.
    if (all_equal) {
        stats.std_of_mean_intra = 0.0;
        return stats;
    }
    double sq = 0.0;
    for (const double v : stats.per_run_mean_intra) {
        const double d = v - stats.mean_of_mean_intra;
        sq += d * d;
    }
    stats.std_of_mean_intra = std::sqrt(sq / static_cast<double>(runs - 1));
    return stats;
}

struct KTraceRow {
    int k = 0;
    double mean = 0.0;
    double std = 0.0;
    bool admissible = false;        // k = 1 is excluded (std is trivially zero)
    bool within_tolerance = false;
};

struct OptimalKDecision {
    int selected_k = 0;
    double eta = 0.0;
    double min_std = 0.0;
    double max_std = 0.0;
    double threshold = 0.0;
    std::vector<KTraceRow> trace;
};

// Largest k (excluding k=1) whose ensemble std lies within eta of the minimum,
// where eta is relative to the min-to-max std range over the admissible k.
inline OptimalKDecision optimal_k(const std::vector<EnsembleStats>& stats_list,
                                  double eta = 0.05) {
    if (stats_list.size() < 2) throw ValidationError("optimal_k needs k_max >= 2");
    for (std::size_t i = 0; i < stats_list.size(); ++i)
        if (stats_list[i].k != static_cast<int>(i) + 1)
            throw ValidationError("stats list must cover contiguous k starting at 1");

    OptimalKDecision decision;
    decision.eta = eta;
    decision.min_std = std::numeric_limits<double>::infinity();
    decision.max_std = -std::numeric_limits<double>::infinity();
    for (const auto& s : stats_list) {
        if (s.k < 2) continue;
        decision.min_std = std::min(decision.min_std, s.std_of_mean_intra);
        decision.max_std = std::max(decision.max_std, s.std_of_mean_intra);
    }
    decision.threshold = decision.min_std + eta * (decision.max_std - decision.min_std);

    decision.trace.reserve(stats_list.size());
    for (const auto& s : stats_list) {
        KTraceRow row;
        row.k = s.k;
        row.mean = s.mean_of_mean_intra;
        row.std = s.std_of_mean_intra;
        row.admissible = s.k >= 2;
        row.within_tolerance = row.admissible && s.std_of_mean_intra <= decision.threshold;
        if (row.within_tolerance) decision.selected_k = s.k;
        decision.trace.push_back(row);
    }
    return decision;
}

} // namespace mstates
