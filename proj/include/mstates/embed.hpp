#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "mstates/error.hpp"

namespace mstates {

// =============================================================================
// Classical (Torgerson) multidimensional scaling. Deterministic by design:
// the downstream clustering ensemble must owe all of its dispersion to the
// k-means initialization, not to the embedding.
// =============================================================================

struct Embedding {
    Eigen::MatrixXd coordinates;       // n x dim, column means 0
    int dim = 2;
    Eigen::VectorXd eigenvalues_used;  // the dim largest double-centering eigenvalues,
                                       // descending, reported verbatim even if <= 0
    double stress = 0.0;               // sqrt(sum (d - dhat)^2 / sum d^2)
    double negative_eigenvalue_mass = 0.0;  // sum |lambda<0| / sum |lambda|, diagnostic
};

// Double-centering B = -1/2 J D^2 J; coordinates from the top-dim eigenpairs
// with eigenvalues clamped at zero. Non-Euclidean input (the zeta matrix is
// one) yields negative eigenvalues, which are reported but not embedded.
inline Embedding classical_mds(const Eigen::MatrixXd& dist, int dim) {
    if (dim != 2 && dim != 3) throw ValidationError("MDS dimension must be 2 or 3");
    const Eigen::Index n = dist.rows();
    if (n != dist.cols() || n < 1) throw ValidationError("MDS input must be square");
    const double scale = dist.cwiseAbs().maxCoeff();
    const double tol = 1e-12 * std::max(1.0, scale);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(dist(i, i)) > tol)
            throw ValidationError("MDS input must have a zero diagonal");
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (dist(i, j) < 0.0 || dist(j, i) < 0.0)
                throw ValidationError("MDS input must be non-negative");
            if (std::abs(dist(i, j) - dist(j, i)) > tol)
                throw ValidationError("MDS input must be symmetric");
        }
    }

    const Eigen::MatrixXd d2 = dist.cwiseProduct(dist);
    const Eigen::VectorXd row_mean = d2.rowwise().mean();
    const double grand_mean = d2.mean();
    Eigen::MatrixXd b(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            b(i, j) = -0.5 * (d2(i, j) - row_mean(i) - row_mean(j) + grand_mean);
    b = ((b + b.transpose()) * 0.5).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
    if (solver.info() != Eigen::Success)
        throw NumericalError("MDS eigensolver failed to converge");
    const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending

    Embedding emb;
    emb.dim = dim;
    emb.eigenvalues_used.resize(dim);
    emb.coordinates.resize(n, dim);
    for (int c = 0; c < dim; ++c) {
        const Eigen::Index idx = n - 1 - c;
        const double lambda = idx >= 0 ? evals(idx) : 0.0;
        emb.eigenvalues_used(c) = lambda;
        if (idx >= 0 && lambda > 0.0)
            emb.coordinates.col(c) = solver.eigenvectors().col(idx) * std::sqrt(lambda);
        else
            emb.coordinates.col(c).setZero();
    }

    double neg = 0.0, total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += std::abs(evals(i));
        if (evals(i) < 0.0) neg += -evals(i);
    }
    emb.negative_eigenvalue_mass = total > 0.0 ? neg / total : 0.0;

    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dhat = (emb.coordinates.row(i) - emb.coordinates.row(j)).norm();
            num += (dist(i, j) - dhat) * (dist(i, j) - dhat);
            den += dist(i, j) * dist(i, j);
        }
    emb.stress = den > 0.0 ? std::sqrt(num / den) : 0.0;
    return emb;
}

} // namespace mstates
