#pragma once

// Independent reference computations used by the tests. Deliberately plain:
// dense matrices, Gaussian elimination, brute-force scans.

#include "hcr/common.hpp"
#include "hcr/reservoir.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using hcr::Matrix;
using hcr::Vector;

/// Solves A X = B by Gaussian elimination with partial pivoting.
inline Matrix gauss_solve(Matrix a, Matrix b) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index piv = c;
        for (Eigen::Index r = c + 1; r < n; ++r)
            if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
        a.row(c).swap(a.row(piv));
        b.row(c).swap(b.row(piv));
        for (Eigen::Index r = c + 1; r < n; ++r) {
            const double f = a(r, c) / a(c, c);
            for (Eigen::Index k = c; k < n; ++k) a(r, k) -= f * a(c, k);
            for (Eigen::Index k = 0; k < b.cols(); ++k) b(r, k) -= f * b(c, k);
        }
    }
    Matrix x = Matrix::Zero(n, b.cols());
    for (Eigen::Index r = n - 1; r >= 0; --r)
        for (Eigen::Index k = 0; k < b.cols(); ++k) {
            double s = b(r, k);
            for (Eigen::Index j = r + 1; j < n; ++j) s -= a(r, j) * x(j, k);
            x(r, k) = s / a(r, r);
        }
    return x;
}

/// Ridge solution from explicitly formed normal equations, summed entry by entry.
inline Matrix ridge(const Matrix& states, const Matrix& targets, double lambda) {
    const Eigen::Index n = states.cols();
    Matrix g = Matrix::Zero(n, n), rhs = Matrix::Zero(n, targets.cols());
    for (Eigen::Index t = 0; t < states.rows(); ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) g(i, j) += states(t, i) * states(t, j);
            for (Eigen::Index k = 0; k < targets.cols(); ++k) rhs(i, k) += states(t, i) * targets(t, k);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) g(i, i) += lambda;
    return gauss_solve(g, rhs);
}

/// Spectral radius by block power (subspace) iteration: a block of `block`
/// random vectors is multiplied and re-orthonormalized; the radius is the
/// largest Ritz value magnitude of the small projected matrix. A block handles
/// complex conjugate dominant pairs that defeat single-vector iteration.
inline double power_radius(const hcr::SparseMatrix& m, int block = 8, int iters = 3000, std::uint64_t seed = 1) {
    const Matrix dense = Matrix(m);
    const Eigen::Index n = dense.rows();
    const Eigen::Index s = std::min<Eigen::Index>(block, n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd q(n, s);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < s; ++j) q(i, j) = g(rng);
    const Eigen::MatrixXd a = dense;
    for (int it = 0; it < iters; ++it) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a * q);
        q = qr.householderQ() * Eigen::MatrixXd::Identity(n, s);
    }
    const Eigen::MatrixXd small = q.transpose() * a * q;
    Eigen::EigenSolver<Eigen::MatrixXd> es(small, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// log(x) mean over finite positive entries.
inline double mean_log(const std::vector<double>& v) {
    double s = 0;
    int n = 0;
    for (double x : v)
        if (x > 0 && std::isfinite(x)) {
            s += std::log(x);
            ++n;
        }
    return n ? s / n : 0;
}

}  // namespace oracle
