#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "mstates/embed.hpp"
#include "mstates/rng.hpp"

using namespace mstates;

namespace {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d(i, j) = (points.row(i) - points.row(j)).norm();
            d(j, i) = d(i, j);
        }
    return d;
}

// Random point set realizable in `dim` dimensions, with a minimum pairwise
// separation so relative-error checks stay meaningful.
Eigen::MatrixXd random_points(Eigen::Index n, int dim, std::uint64_t seed) {
    Rng rng(seed);
    while (true) {
        Eigen::MatrixXd pts(n, dim);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int c = 0; c < dim; ++c) pts(i, c) = 2.0 * rng.next_double() - 1.0;
        double min_sep = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                min_sep = std::min(min_sep, (pts.row(i) - pts.row(j)).norm());
        if (min_sep > 1e-3) return pts;
    }
}

} // namespace

TEST_CASE("classical_mds on the all-zero distance matrix") {
    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(6, 6);
    const Embedding emb = classical_mds(zeros, 2);
    CHECK(emb.coordinates.cwiseAbs().maxCoeff() == 0.0);
    CHECK(emb.stress == 0.0);
}

TEST_CASE("classical_mds recovers an equilateral triangle") {
    Eigen::MatrixXd d(3, 3);
    d << 0, 1, 1,
         1, 0, 1,
         1, 1, 0;
    const Embedding emb = classical_mds(d, 2);
    const Eigen::MatrixXd rebuilt = pairwise_distances(emb.coordinates);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j)
            if (i != j) CHECK_THAT(rebuilt(i, j), Catch::Matchers::WithinAbs(1.0, 1e-10));
    CHECK(emb.stress < 1e-10);
}

TEST_CASE("classical_mds flattens collinear points embedded in 2-D") {
    Eigen::MatrixXd pts(4, 1);
    pts << 0, 1, 2, 3;
    const Eigen::MatrixXd d = pairwise_distances(pts);
    const Embedding emb = classical_mds(d, 2);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::abs(emb.coordinates(i, 1)) < 1e-6);
    const Eigen::MatrixXd rebuilt = pairwise_distances(emb.coordinates);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 4; ++j)
            CHECK_THAT(rebuilt(i, j), Catch::Matchers::WithinAbs(d(i, j), 1e-10));
}

TEST_CASE("classical_mds exactly recovers realizable distance geometries") {
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        const int dim = trial % 2 == 0 ? 2 : 3;
        const auto pts = random_points(12, dim, 8000 + trial);
        const Eigen::MatrixXd d = pairwise_distances(pts);
        const Embedding emb = classical_mds(d, dim);
        const Eigen::MatrixXd rebuilt = pairwise_distances(emb.coordinates);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < d.rows(); ++i)
            for (Eigen::Index j = i + 1; j < d.cols(); ++j)
                worst = std::max(worst, std::abs(rebuilt(i, j) - d(i, j)) / d(i, j));
        CHECK(worst < 1e-8);
        // Output is compared through distances only; coordinates are unique
        // just up to orthogonal transforms.
        CHECK(emb.eigenvalues_used(0) >= emb.eigenvalues_used(1));
    }
}

TEST_CASE("classical_mds centers the configuration") {
    const auto pts = random_points(15, 2, 77);
    const Embedding emb = classical_mds(pairwise_distances(pts), 2);
    for (int c = 0; c < 2; ++c)
        CHECK_THAT(emb.coordinates.col(c).mean(), Catch::Matchers::WithinAbs(0.0, 1e-9));
}

TEST_CASE("classical_mds reports negative eigenvalues verbatim and clamps them") {
    // Collinear points under the convex distortion |i-j|^1.5: one positive
    // double-centering eigenvalue, the rest negative, so the D=3 embedding
    // must surface a negative eigenvalue in eigenvalues_used.
    Eigen::MatrixXd d(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 4; ++j)
            d(i, j) = std::pow(std::abs(static_cast<double>(i - j)), 1.5);
    const Embedding emb = classical_mds(d, 3);
    CHECK(emb.eigenvalues_used.minCoeff() < -0.1);
    CHECK(emb.negative_eigenvalue_mass > 0.0);
    // The column for the clamped eigenvalue carries no coordinates.
    CHECK(emb.coordinates.col(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(emb.stress > 0.0);
}

TEST_CASE("classical_mds input validation") {
    Eigen::MatrixXd ok = Eigen::MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(classical_mds(ok, 4), ValidationError);
    CHECK_THROWS_AS(classical_mds(ok, 1), ValidationError);

    Eigen::MatrixXd asym = ok;
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(classical_mds(asym, 2), ValidationError);

    Eigen::MatrixXd negative = ok;
    negative(0, 1) = negative(1, 0) = -0.5;
    CHECK_THROWS_AS(classical_mds(negative, 2), ValidationError);

    Eigen::MatrixXd dirty_diag = ok;
    dirty_diag(1, 1) = 0.3;
    CHECK_THROWS_AS(classical_mds(dirty_diag, 2), ValidationError);

    Eigen::MatrixXd rect(2, 3);
    rect.setZero();
    CHECK_THROWS_AS(classical_mds(rect, 2), ValidationError);
}
