#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "extreme_blocks/error.hpp"
#include "extreme_blocks/graph.hpp"
#include "extreme_blocks/linalg.hpp"

namespace extreme_blocks {

/// Matrix with rows and columns labelled by node identifiers.
struct LabelledMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;

    std::size_t index(std::string_view id) const {
        auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end()) {
            throw Error(ErrorKind::UnknownNode, "unknown node '" + std::string(id) + "'");
        }
        return static_cast<std::size_t>(it - ids.begin());
    }

    double operator()(std::string_view a, std::string_view b) const {
        return values(static_cast<Eigen::Index>(index(a)), static_cast<Eigen::Index>(index(b)));
    }

    /// Sub-matrix on the given identifiers, in the order given.
    LabelledMatrix restrict(const std::vector<std::string>& subset) const {
        LabelledMatrix out{subset, Eigen::MatrixXd(subset.size(), subset.size())};
        std::vector<Eigen::Index> idx;
        for (const auto& s : subset) idx.push_back(static_cast<Eigen::Index>(index(s)));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < idx.size(); ++j) {
                out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    values(idx[i], idx[j]);
            }
        }
        return out;
    }
};

/// Symmetric matrix of shortest-path sums of edge parameters, zero diagonal.
using PathSumMatrix = LabelledMatrix;

/// Matrix with entries 2 (d_si + d_sj - d_ij) for i, j in `members` minus s,
/// taken in the order of `members`. Applied to a clique block of edge
/// parameters it is the covariance of the clique's log increments.
inline Eigen::MatrixXd psi_matrix(const Eigen::MatrixXd& d, std::span<const std::size_t> members,
                                  std::size_t s) {
    std::vector<Eigen::Index> rest;
    for (auto v : members) {
        if (v != s) rest.push_back(static_cast<Eigen::Index>(v));
    }
    const auto m = static_cast<Eigen::Index>(rest.size());
    const auto si = static_cast<Eigen::Index>(s);
    Eigen::MatrixXd psi(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            psi(i, j) = 2.0 * (d(si, rest[i]) + d(si, rest[j]) - d(rest[i], rest[j]));
        }
    }
    return psi;
}

/// Edge parameters delta^2 of a block graph, validated clique by clique.
class DeltaFamily {
public:
    /// Validates parameters given in the order of `graph->edges()`.
    ///
    /// Throws MissingEdgeParam when the count does not match the edge set,
    /// NonPositiveParam for a non-positive or non-finite value, and NotCND
    /// naming the first clique whose parameter block is not conditionally
    /// negative definite.
    static DeltaFamily validate(std::shared_ptr<const BlockGraph> graph, std::vector<double> by_edge) {
        if (!graph) throw Error(ErrorKind::MissingEdgeParam, "no graph");
        if (by_edge.size() != graph->edges().size()) {
            throw Error(ErrorKind::MissingEdgeParam,
                        "expected " + std::to_string(graph->edges().size()) + " edge parameters, got " +
                            std::to_string(by_edge.size()));
        }
        for (std::size_t e = 0; e < by_edge.size(); ++e) {
            if (!(by_edge[e] > 0.0) || !std::isfinite(by_edge[e])) {
                const auto& edge = graph->edges()[e];
                throw Error(ErrorKind::NonPositiveParam, "delta2 on edge (" + graph->id(edge.from) + ", " +
                                                             graph->id(edge.to) + ") must be positive");
            }
        }
        DeltaFamily d(std::move(graph), std::move(by_edge));
        for (std::size_t c = 0; c < d.graph().cliques().size(); ++c) {
            const auto& members = d.graph().cliques()[c];
            if (members.size() < 2) continue;
            // members are sorted, so front() is the smallest index
            if (!is_positive_definite(psi_matrix(d.matrix(), members, members.front()))) {
                std::string names;
                for (auto v : members) names += (names.empty() ? "" : ",") + d.graph().id(v);
                throw Error(ErrorKind::NotCND, "clique {" + names + "} is not conditionally negative definite");
            }
        }
        return d;
    }

    /// Validates parameters keyed by identifier pairs (either orientation).
    static DeltaFamily validate(std::shared_ptr<const BlockGraph> graph,
                                const std::map<std::pair<std::string, std::string>, double>& by_pair) {
        if (!graph) throw Error(ErrorKind::MissingEdgeParam, "no graph");
        std::vector<double> by_edge(graph->edges().size(), 0.0);
        std::vector<bool> seen(by_edge.size(), false);
        for (const auto& [key, value] : by_pair) {
            auto e = graph->edge_index(graph->index(key.first), graph->index(key.second));
            if (!e) {
                throw Error(ErrorKind::MissingEdgeParam,
                            "parameter given for non-edge (" + key.first + ", " + key.second + ")");
            }
            if (seen[*e]) {
                throw Error(ErrorKind::DuplicateEdge,
                            "parameter for (" + key.first + ", " + key.second + ") given twice");
            }
            seen[*e] = true;
            by_edge[*e] = value;
        }
        for (std::size_t e = 0; e < seen.size(); ++e) {
            if (!seen[e]) {
                const auto& edge = graph->edges()[e];
                throw Error(ErrorKind::MissingEdgeParam,
                            "no parameter for edge (" + graph->id(edge.from) + ", " + graph->id(edge.to) + ")");
            }
        }
        return validate(std::move(graph), std::move(by_edge));
    }

    const BlockGraph& graph() const noexcept { return *graph_; }
    const std::shared_ptr<const BlockGraph>& graph_ptr() const noexcept { return graph_; }

    /// Parameters in the order of `graph().edges()`.
    const std::vector<double>& by_edge() const noexcept { return by_edge_; }

    double delta2(NodeIndex a, NodeIndex b) const {
        auto e = graph_->edge_index(a, b);
        if (!e) throw Error(ErrorKind::MissingEdgeParam, "not an edge");
        return by_edge_[*e];
    }

    /// Dense |V| x |V| matrix holding delta^2 on edges and zero elsewhere.
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }

    /// Parameter block of one clique, rows and columns in clique order.
    Eigen::MatrixXd clique_matrix(std::size_t clique) const {
        const auto& members = graph_->cliques().at(clique);
        const auto k = static_cast<Eigen::Index>(members.size());
        Eigen::MatrixXd out(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < k; ++j) {
                out(i, j) = matrix_(static_cast<Eigen::Index>(members[static_cast<std::size_t>(i)]),
                                    static_cast<Eigen::Index>(members[static_cast<std::size_t>(j)]));
            }
        }
        return out;
    }

private:
    DeltaFamily(std::shared_ptr<const BlockGraph> graph, std::vector<double> by_edge)
        : graph_(std::move(graph)), by_edge_(std::move(by_edge)) {
        const auto n = static_cast<Eigen::Index>(graph_->size());
        matrix_ = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t e = 0; e < by_edge_.size(); ++e) {
            const auto& edge = graph_->edges()[e];
            matrix_(static_cast<Eigen::Index>(edge.from), static_cast<Eigen::Index>(edge.to)) = by_edge_[e];
            matrix_(static_cast<Eigen::Index>(edge.to), static_cast<Eigen::Index>(edge.from)) = by_edge_[e];
        }
    }

    std::shared_ptr<const BlockGraph> graph_;
    std::vector<double> by_edge_;
    Eigen::MatrixXd matrix_;
};

inline DeltaFamily validate_delta(std::shared_ptr<const BlockGraph> graph, std::vector<double> by_edge) {
    return DeltaFamily::validate(std::move(graph), std::move(by_edge));
}

/// p_ij = sum of delta^2 over the edges of the shortest path from i to j.
inline PathSumMatrix path_sum_matrix(const DeltaFamily& d) {
    const auto& g = d.graph();
    const auto n = g.size();
    PathSumMatrix p{g.ids(), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
    for (NodeIndex u = 0; u < n; ++u) {
        for (NodeIndex v : g.breadth_first_order(u)) {
            if (v == u) continue;
            const NodeIndex w = g.predecessor(u, v);
            p.values(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) =
                p.values(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(w)) + d.delta2(w, v);
        }
    }
    return p;
}

/// Mean and covariance of the Gaussian log limit field given a large value
/// at the anchor. Vectors are indexed by `others` = V minus anchor, in
/// node-index order.
struct GaussianLimit {
    NodeIndex anchor = kNoNode;
    std::vector<NodeIndex> others;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

inline std::vector<NodeIndex> nodes_except(std::size_t n, NodeIndex u) {
    std::vector<NodeIndex> out;
    for (NodeIndex v = 0; v < n; ++v) {
        if (v != u) out.push_back(v);
    }
    return out;
}

/// Gaussian limit from a path-sum matrix: mean -2 p_ui, covariance
/// 2 (p_ui + p_uj - p_ij).
inline GaussianLimit gaussian_limit(const Eigen::MatrixXd& p, NodeIndex u) {
    const auto n = static_cast<std::size_t>(p.rows());
    if (u >= n) throw Error(ErrorKind::UnknownNode, "anchor out of range");
    GaussianLimit out;
    out.anchor = u;
    out.others = nodes_except(n, u);
    const auto m = static_cast<Eigen::Index>(out.others.size());
    const auto ui = static_cast<Eigen::Index>(u);
    out.mean.resize(m);
    out.cov.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto vi = static_cast<Eigen::Index>(out.others[static_cast<std::size_t>(i)]);
        out.mean(i) = -2.0 * p(ui, vi);
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto vj = static_cast<Eigen::Index>(out.others[static_cast<std::size_t>(j)]);
            out.cov(i, j) = 2.0 * (p(ui, vi) + p(ui, vj) - p(vi, vj));
        }
    }
    return out;
}

inline GaussianLimit gaussian_limit(const DeltaFamily& d, NodeIndex u) {
    return gaussian_limit(path_sum_matrix(d).values, u);
}

/// Mean and covariance of the log increments of one clique, leaving from s.
struct CliqueLimit {
    std::vector<NodeIndex> targets;  // clique members other than s
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

inline CliqueLimit clique_limit_params(const DeltaFamily& d, std::size_t clique, NodeIndex s) {
    const auto& members = d.graph().cliques().at(clique);
    if (std::find(members.begin(), members.end(), s) == members.end()) {
        throw Error(ErrorKind::NodeNotInClique, "node " + d.graph().id(s) + " is not in the clique");
    }
    CliqueLimit out;
    for (auto v : members) {
        if (v != s) out.targets.push_back(v);
    }
    out.mean.resize(static_cast<Eigen::Index>(out.targets.size()));
    for (std::size_t i = 0; i < out.targets.size(); ++i) {
        out.mean(static_cast<Eigen::Index>(i)) = -2.0 * d.delta2(s, out.targets[i]);
    }
    out.cov = psi_matrix(d.matrix(), members, s);
    return out;
}

/// Inverse of the log-field covariance for anchor u, assembled from the
/// block-diagonal increment precision and the path-incidence matrix:
/// Theta_u = (M^-1)^T Theta^Z M^-1, where M^-1 has 1 on the diagonal and
/// -1 at (v, predecessor of v) whenever the predecessor is not u.
inline Eigen::MatrixXd precision_matrix(const DeltaFamily& d, NodeIndex u) {
    const auto& g = d.graph();
    const auto n = g.size();
    if (u >= n) throw Error(ErrorKind::UnknownNode, "anchor out of range");
    const auto others = nodes_except(n, u);
    const auto m = static_cast<Eigen::Index>(others.size());
    std::vector<Eigen::Index> pos(n, -1);
    for (std::size_t i = 0; i < others.size(); ++i) pos[others[i]] = static_cast<Eigen::Index>(i);

    Eigen::MatrixXd m_inv = Eigen::MatrixXd::Identity(m, m);
    for (NodeIndex v : others) {
        const NodeIndex w = g.predecessor(u, v);
        if (w != u) m_inv(pos[v], pos[w]) = -1.0;
    }

    Eigen::MatrixXd theta_z = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t c = 0; c < g.cliques().size(); ++c) {
        const NodeIndex s = g.separator_node(u, c);
        const auto block = clique_limit_params(d, c, s);
        Eigen::LLT<Eigen::MatrixXd> llt(block.cov);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorKind::SingularBlock, "increment covariance block is singular");
        }
        const Eigen::MatrixXd inv =
            llt.solve(Eigen::MatrixXd::Identity(block.cov.rows(), block.cov.cols()));
        for (std::size_t i = 0; i < block.targets.size(); ++i) {
            for (std::size_t j = 0; j < block.targets.size(); ++j) {
                theta_z(pos[block.targets[i]], pos[block.targets[j]]) =
                    inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
    }
    return m_inv.transpose() * theta_z * m_inv;
}

/// True iff a^T m a < 0 for every non-zero a with zero sum. The matrix is
/// contracted with the basis e_i - e_last of the zero-sum subspace and the
/// negated result tested for positive definiteness.
inline bool check_cnd(const Eigen::MatrixXd& m, double rel = kPdRelativeThreshold) {
    if (!is_symmetric(m)) throw Error(ErrorKind::NotSymmetric, "matrix is not symmetric");
    const Eigen::Index n = m.rows();
    if (n <= 1) return true;
    const Eigen::Index k = n - 1;
    Eigen::MatrixXd contracted(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            contracted(i, j) = -(m(i, j) - m(i, k) - m(k, j) + m(k, k));
        }
    }
    return is_positive_definite(contracted, rel);
}

struct ExtremalGraphReport {
    double max_violation = 0.0;
    bool passed = true;
    NodeIndex worst_anchor = kNoNode;
    NodeIndex worst_i = kNoNode;
    NodeIndex worst_j = kNoNode;
};

inline constexpr double kPrecisionZeroTolerance = 1e-9;

/// Largest |(Theta_u)_ij| over all anchors u and non-adjacent i, j != u.
inline ExtremalGraphReport extremal_graph_check(const DeltaFamily& d,
                                                double tolerance = kPrecisionZeroTolerance) {
    const auto& g = d.graph();
    ExtremalGraphReport report;
    for (NodeIndex u = 0; u < g.size(); ++u) {
        const auto theta = precision_matrix(d, u);
        const auto others = nodes_except(g.size(), u);
        for (std::size_t i = 0; i < others.size(); ++i) {
            for (std::size_t j = i + 1; j < others.size(); ++j) {
                if (g.adjacent(others[i], others[j])) continue;
                const double v = std::abs(theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                if (report.worst_anchor == kNoNode || v > report.max_violation) {
                    report.max_violation = v;
                    report.worst_anchor = u;
                    report.worst_i = others[i];
                    report.worst_j = others[j];
                }
            }
        }
    }
    report.passed = report.max_violation <= tolerance;
    return report;
}

/// Edge-incidence indicator of the shortest path from a to b.
inline Eigen::VectorXd path_incidence(const BlockGraph& g, NodeIndex a, NodeIndex b) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.edges().size()));
    for (const auto& e : g.shortest_path(a, b)) {
        out(static_cast<Eigen::Index>(*g.edge_index(e.from, e.to))) = 1.0;
    }
    return out;
}

/// Linear map from edge parameters to the vectorized covariance of the log
/// field for anchor u. Row i * m + j holds the coefficients of
/// (Sigma_u)_ij, with i, j ranging over V minus u in index order.
inline Eigen::MatrixXd covariance_design(const BlockGraph& g, NodeIndex u) {
    const auto others = nodes_except(g.size(), u);
    const auto m = others.size();
    std::vector<Eigen::VectorXd> from_u;
    for (auto v : others) from_u.push_back(path_incidence(g, u, v));
    Eigen::MatrixXd design(static_cast<Eigen::Index>(m * m), static_cast<Eigen::Index>(g.edges().size()));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            design.row(static_cast<Eigen::Index>(i * m + j)) =
                2.0 * (from_u[i] + from_u[j] - path_incidence(g, others[i], others[j])).transpose();
        }
    }
    return design;
}

/// Linear map from edge parameters to the log-field mean for anchor u.
inline Eigen::MatrixXd mean_design(const BlockGraph& g, NodeIndex u) {
    const auto others = nodes_except(g.size(), u);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(others.size()), static_cast<Eigen::Index>(g.edges().size()));
    for (std::size_t i = 0; i < others.size(); ++i) {
        design.row(static_cast<Eigen::Index>(i)) = -2.0 * path_incidence(g, u, others[i]).transpose();
    }
    return design;
}

}  // namespace extreme_blocks
