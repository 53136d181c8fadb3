#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "extreme_blocks/error.hpp"
#include "extreme_blocks/graph.hpp"
#include "extreme_blocks/model.hpp"
#include "extreme_blocks/nnls.hpp"

namespace extreme_blocks {

enum class Scale { Raw, Pareto };

/// n x |V| observations with one column per node identifier.
struct SampleSet {
    std::vector<std::string> ids;
    Eigen::MatrixXd data;
    Scale scale = Scale::Raw;

    std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }

    void validate() const {
        if (static_cast<std::size_t>(data.cols()) != ids.size()) {
            throw Error(ErrorKind::DimensionMismatch, "column count does not match the identifiers");
        }
        if (data.rows() < 2) throw Error(ErrorKind::InvalidSample, "need at least two observations");
        if (!data.allFinite()) throw Error(ErrorKind::InvalidSample, "sample contains non-finite values");
        if (scale == Scale::Pareto && !(data.array() > 0.0).all()) {
            throw Error(ErrorKind::InvalidSample, "pareto-scale sample must be strictly positive");
        }
    }

    /// Columns reordered to the node-index order of g.
    SampleSet aligned_to(const BlockGraph& g) const {
        if (ids.size() != g.size()) {
            throw Error(ErrorKind::DimensionMismatch, "sample columns do not match the graph nodes");
        }
        SampleSet out{g.ids(), Eigen::MatrixXd(data.rows(), data.cols()), scale};
        std::vector<bool> seen(g.size(), false);
        for (std::size_t c = 0; c < ids.size(); ++c) {
            const NodeIndex v = g.index(ids[c]);
            if (seen[v]) throw Error(ErrorKind::DimensionMismatch, "column '" + ids[c] + "' repeated");
            seen[v] = true;
            out.data.col(static_cast<Eigen::Index>(v)) = data.col(static_cast<Eigen::Index>(c));
        }
        return out;
    }
};

/// Empirical standardization to unit Pareto margins: (n+1) / (n+1-r) with r
/// the rank of the observation in its column, ties given their average rank.
inline SampleSet rank_transform(const SampleSet& s) {
    s.validate();
    const auto n = static_cast<std::size_t>(s.data.rows());
    SampleSet out{s.ids, Eigen::MatrixXd(s.data.rows(), s.data.cols()), Scale::Pareto};
    std::vector<std::size_t> order(n);
    for (Eigen::Index c = 0; c < s.data.cols(); ++c) {
        const auto col = s.data.col(c);
        if (col.maxCoeff() == col.minCoeff()) {
            throw Error(ErrorKind::ConstantColumn, "column '" + s.ids[static_cast<std::size_t>(c)] + "' is constant");
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return col(static_cast<Eigen::Index>(a)) < col(static_cast<Eigen::Index>(b));
        });
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j + 1 < n && col(static_cast<Eigen::Index>(order[j + 1])) == col(static_cast<Eigen::Index>(order[i]))) {
                ++j;
            }
            const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
            const double value = static_cast<double>(n + 1) / (static_cast<double>(n + 1) - rank);
            for (std::size_t m = i; m <= j; ++m) out.data(static_cast<Eigen::Index>(order[m]), c) = value;
            i = j + 1;
        }
    }
    return out;
}

/// Log-spacings for one anchor: rows ln X_v - ln X_u, v != u in column
/// order, over the k observations with the largest X_u.
struct AnchorSpacings {
    NodeIndex anchor = kNoNode;
    std::size_t sample_rows = 0;
    Eigen::MatrixXd rows;
};

/// Rows are listed by decreasing anchor value; equal anchor values keep
/// increasing row order. The anchor is a column index of s.
inline AnchorSpacings log_spacings(const SampleSet& s, NodeIndex u, std::size_t k) {
    if (s.scale != Scale::Pareto) throw Error(ErrorKind::InvalidSample, "log-spacings need a pareto-scale sample");
    s.validate();
    const auto n = s.rows();
    if (u >= s.ids.size()) throw Error(ErrorKind::UnknownNode, "anchor out of range");
    if (k < 1 || k >= n) {
        throw Error(ErrorKind::KOutOfRange, "k = " + std::to_string(k) + " outside [1, " + std::to_string(n - 1) + "]");
    }
    const auto col = s.data.col(static_cast<Eigen::Index>(u));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return col(static_cast<Eigen::Index>(a)) > col(static_cast<Eigen::Index>(b));
    });
    const auto others = nodes_except(s.ids.size(), u);
    AnchorSpacings out{u, n, Eigen::MatrixXd(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(others.size()))};
    for (std::size_t r = 0; r < k; ++r) {
        const auto i = static_cast<Eigen::Index>(order[r]);
        const double base = std::log(s.data(i, static_cast<Eigen::Index>(u)));
        for (std::size_t c = 0; c < others.size(); ++c) {
            out.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                std::log(s.data(i, static_cast<Eigen::Index>(others[c]))) - base;
        }
    }
    return out;
}

/// Empirical first and second moments of the log-spacings of one anchor.
struct AnchorMoments {
    NodeIndex anchor = kNoNode;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    std::size_t k = 0;
    std::size_t sample_rows = 0;
};

inline AnchorMoments moments(const AnchorSpacings& sp) {
    const auto k = sp.rows.rows();
    if (k < 2) throw Error(ErrorKind::KOutOfRange, "need at least two spacings for a covariance");
    AnchorMoments out;
    out.anchor = sp.anchor;
    out.k = static_cast<std::size_t>(k);
    out.sample_rows = sp.sample_rows;
    out.mean = sp.rows.colwise().mean().transpose();
    const Eigen::MatrixXd centred = sp.rows.rowwise() - out.mean.transpose();
    out.cov = centred.transpose() * centred / static_cast<double>(k - 1);
    return out;
}

struct FitOptions {
    /// Add the mean condition mu_u = -2 p_u with weight mean_weight.
    bool use_mean = false;
    double mean_weight = 1.0;
    /// Optional per-anchor weights; anchors not listed get weight 1.
    std::map<NodeIndex, double> anchor_weights;
    double kkt_tolerance = 1e-10;
};

struct AnchorDiagnostics {
    NodeIndex anchor = kNoNode;
    std::size_t k = 0;
    std::size_t sample_rows = 0;
};

struct FitResult {
    std::vector<double> delta2;  // in the order of graph.edges()
    double objective = 0.0;
    std::vector<AnchorDiagnostics> anchors;
};

namespace detail {

struct StackedProblem {
    Eigen::MatrixXd design;
    Eigen::VectorXd target;
};

inline StackedProblem stack_moments(const BlockGraph& g, const std::vector<AnchorMoments>& ms,
                                    const FitOptions& opts) {
    const auto e = static_cast<Eigen::Index>(g.edges().size());
    std::vector<Eigen::MatrixXd> blocks;
    std::vector<Eigen::VectorXd> targets;
    for (const auto& m : ms) {
        if (m.anchor >= g.size()) throw Error(ErrorKind::UnknownNode, "anchor out of range");
        const auto dim = static_cast<Eigen::Index>(g.size() - 1);
        if (m.cov.rows() != dim || m.cov.cols() != dim) {
            throw Error(ErrorKind::DimensionMismatch, "covariance size does not match the graph");
        }
        auto it = opts.anchor_weights.find(m.anchor);
        const double w = it == opts.anchor_weights.end() ? 1.0 : it->second;
        if (!(w >= 0.0)) throw Error(ErrorKind::InvalidSample, "anchor weights must be nonnegative");
        const double root = std::sqrt(w);
        blocks.push_back(root * covariance_design(g, m.anchor));
        targets.push_back(root * Eigen::Map<const Eigen::VectorXd>(m.cov.data(), dim * dim));
        // covariance_design indexes row i * m + j; the column-major map gives
        // j * m + i, which coincides because both matrices are symmetric
        if (opts.use_mean) {
            if (m.mean.size() != dim) throw Error(ErrorKind::DimensionMismatch, "mean size does not match the graph");
            const double rm = std::sqrt(w * opts.mean_weight);
            blocks.push_back(rm * mean_design(g, m.anchor));
            targets.push_back(rm * m.mean);
        }
    }
    Eigen::Index rows = 0;
    for (const auto& b : blocks) rows += b.rows();
    StackedProblem out{Eigen::MatrixXd(rows, e), Eigen::VectorXd(rows)};
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        out.design.middleRows(at, blocks[i].rows()) = blocks[i];
        out.target.segment(at, blocks[i].rows()) = targets[i];
        at += blocks[i].rows();
    }
    return out;
}

}  // namespace detail

/// Weighted moment discrepancy of edge parameters `delta2`.
inline double fit_objective(const BlockGraph& g, const std::vector<AnchorMoments>& ms,
                            const std::vector<double>& delta2, const FitOptions& opts = {}) {
    const auto prob = detail::stack_moments(g, ms, opts);
    if (delta2.size() != g.edges().size()) throw Error(ErrorKind::DimensionMismatch, "wrong parameter count");
    const Eigen::Map<const Eigen::VectorXd> x(delta2.data(), static_cast<Eigen::Index>(delta2.size()));
    return (prob.design * x - prob.target).squaredNorm();
}

/// Minimizes sum_u w_u |Sigma_u(delta2) - Sigma_hat_u|_F^2 (plus the optional
/// mean term) over delta2 >= 0. The model is linear in delta2, so this is a
/// nonnegative least-squares problem.
///
/// Throws Underdetermined, naming the edges in the null space of the design,
/// when the moments do not determine every edge parameter.
inline FitResult fit_from_moments(const BlockGraph& g, const std::vector<AnchorMoments>& ms,
                                  const FitOptions& opts = {}) {
    if (ms.empty()) throw Error(ErrorKind::Underdetermined, "no anchors supplied");
    if (g.edges().empty()) throw Error(ErrorKind::Underdetermined, "graph has no edges");
    const auto prob = detail::stack_moments(g, ms, opts);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(prob.design, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > cutoff ? 1 : 0;
    const auto e = static_cast<Eigen::Index>(g.edges().size());
    if (rank < e) {
        std::string names;
        const Eigen::MatrixXd null = svd.matrixV().rightCols(e - rank);
        for (Eigen::Index j = 0; j < e; ++j) {
            if (null.row(j).norm() > 1e-8) {
                const auto& edge = g.edges()[static_cast<std::size_t>(j)];
                names += (names.empty() ? "" : ", ") + ("(" + g.id(edge.from) + "," + g.id(edge.to) + ")");
            }
        }
        throw Error(ErrorKind::Underdetermined, "moments do not determine edges " + names);
    }
    const auto sol = nnls(prob.design, prob.target, opts.kkt_tolerance);
    FitResult out;
    out.delta2.assign(sol.x.data(), sol.x.data() + sol.x.size());
    out.objective = sol.residual_norm2;
    for (const auto& m : ms) out.anchors.push_back({m.anchor, m.k, m.sample_rows});
    return out;
}

/// Fits edge parameters to per-anchor log-spacings (columns in node-index
/// order of g, as produced by log_spacings on a sample aligned to g).
inline FitResult fit_delta(const BlockGraph& g, const std::vector<AnchorSpacings>& spacings,
                           const FitOptions& opts = {}) {
    std::vector<AnchorMoments> ms;
    for (const auto& sp : spacings) {
        if (static_cast<std::size_t>(sp.rows.cols()) + 1 != g.size()) {
            throw Error(ErrorKind::DimensionMismatch, "spacings do not match the graph");
        }
        ms.push_back(moments(sp));
    }
    return fit_from_moments(g, ms, opts);
}

}  // namespace extreme_blocks
