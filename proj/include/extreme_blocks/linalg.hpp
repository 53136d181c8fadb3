#pragma once

#include <Eigen/Dense>

#include "extreme_blocks/error.hpp"

namespace extreme_blocks {

inline constexpr double kPdRelativeThreshold = 1e-10;

/// Positive definiteness by symmetric eigendecomposition: the smallest
/// eigenvalue must exceed `rel` times the largest, which must be positive.
inline bool is_positive_definite(const Eigen::MatrixXd& m, double rel = kPdRelativeThreshold) {
    if (m.rows() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    return hi > 0.0 && lo > rel * hi;
}

/// Lower Cholesky factor. A diagonal jitter of 1e-12 * trace is added once
/// if the plain factorization fails.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::MatrixXd jittered = m;
    jittered.diagonal().array() += 1e-12 * m.trace();
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NotPD, "matrix is not positive definite");
    }
    return llt.matrixL();
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace extreme_blocks
