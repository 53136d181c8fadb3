#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "extreme_blocks/error.hpp"

namespace extreme_blocks {

struct NnlsResult {
    Eigen::VectorXd x;
    double residual_norm2 = 0.0;
    int iterations = 0;
    bool converged = true;
};

/// Lawson-Hanson active-set solver for min |A x - b|^2 subject to x >= 0.
/// Stops once every component of the gradient A^T (b - A x) on the active
/// set is at most kkt_tol * max(1, |A^T b|_inf).
inline NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double kkt_tol = 1e-10) {
    if (a.rows() != b.size()) throw Error(ErrorKind::DimensionMismatch, "design and target sizes differ");
    const Eigen::Index n = a.cols();
    const double tol = kkt_tol * std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff());
    NnlsResult out;
    out.x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const int max_iter = 3 * static_cast<int>(n) + 10;

    const auto solve_passive = [&]() {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
        }
        Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
        const Eigen::VectorXd s_sub = sub.colPivHouseholderQr().solve(b);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < cols.size(); ++k) s(cols[k]) = s_sub(static_cast<Eigen::Index>(k));
        return s;
    };

    Eigen::VectorXd w = a.transpose() * (b - a * out.x);
    while (true) {
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > tol && (best < 0 || w(j) > w(best))) best = j;
        }
        if (best < 0) break;
        if (++out.iterations > max_iter) {
            out.converged = false;
            break;
        }
        passive[static_cast<std::size_t>(best)] = true;
        Eigen::VectorXd s = solve_passive();
        while (true) {
            double alpha = 1.0;
            Eigen::Index blocking = -1;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
                    const double denom = out.x(j) - s(j);
                    const double step = denom > 0.0 ? out.x(j) / denom : 0.0;
                    if (blocking < 0 || step < alpha) {
                        alpha = step;
                        blocking = j;
                    }
                }
            }
            if (blocking < 0) break;
            out.x += alpha * (s - out.x);
            out.x(blocking) = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && out.x(j) <= 0.0) {
                    passive[static_cast<std::size_t>(j)] = false;
                    out.x(j) = 0.0;
                }
            }
            s = solve_passive();
        }
        out.x = s;
        w = a.transpose() * (b - a * out.x);
    }
    out.residual_norm2 = (a * out.x - b).squaredNorm();
    return out;
}

}  // namespace extreme_blocks
