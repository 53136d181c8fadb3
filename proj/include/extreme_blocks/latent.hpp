#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "extreme_blocks/error.hpp"
#include "extreme_blocks/graph.hpp"
#include "extreme_blocks/model.hpp"

namespace extreme_blocks {

/// Split of the nodes into observed and latent ones.
class ObservationMask {
public:
    ObservationMask() = default;
    explicit ObservationMask(std::vector<std::string> latent) : latent_(std::move(latent)) {
        std::sort(latent_.begin(), latent_.end());
        latent_.erase(std::unique(latent_.begin(), latent_.end()), latent_.end());
    }

    const std::vector<std::string>& latent() const noexcept { return latent_; }

    /// Latent flag per node index; throws InvalidMask for unknown nodes or
    /// when nothing would be observed.
    std::vector<bool> flags(const BlockGraph& g) const {
        std::vector<bool> out(g.size(), false);
        for (const auto& id : latent_) {
            if (!g.contains(id)) throw Error(ErrorKind::InvalidMask, "latent node '" + id + "' is not in the graph");
            out[g.index(id)] = true;
        }
        if (latent_.size() >= g.size()) throw Error(ErrorKind::InvalidMask, "no observed nodes");
        return out;
    }

    /// Observed identifiers in node-index order.
    std::vector<std::string> observed(const BlockGraph& g) const {
        const auto latent = flags(g);
        std::vector<std::string> out;
        for (NodeIndex v = 0; v < g.size(); ++v) {
            if (!latent[v]) out.push_back(g.id(v));
        }
        return out;
    }

private:
    std::vector<std::string> latent_;
};

struct IdentifiabilityReport {
    bool identifiable = true;
    std::vector<std::string> offending;  // latent nodes in fewer than three cliques
};

/// Edge parameters are determined by the observed path sums iff every latent
/// node lies in at least three cliques.
inline IdentifiabilityReport check_identifiable(const BlockGraph& g, const ObservationMask& mask) {
    const auto latent = mask.flags(g);
    IdentifiabilityReport out;
    for (NodeIndex v = 0; v < g.size(); ++v) {
        if (latent[v] && g.clique_degree(v) < 3) out.offending.push_back(g.id(v));
    }
    out.identifiable = out.offending.empty();
    return out;
}

inline constexpr double kRecoveryTolerance = 1e-9;

namespace detail {

/// Clique at a through which the shortest path from a to v leaves a.
inline std::size_t direction(const BlockGraph& g, NodeIndex a, NodeIndex v) {
    const auto path = g.path_nodes(a, v);
    return g.clique_of_edge(a, path[1]);
}

}  // namespace detail

/// Reconstructs the full path-sum matrix from its restriction to the
/// observed nodes.
///
/// For a latent node a and an observed node o, take observed nodes j and y in
/// two further clique directions at a; all three paths meet at a, so
/// p_ao = (p_oj + p_oy - p_jy) / 2. The representatives are the first
/// observed nodes, in graph order, of the first two other directions. For two latent
/// nodes a and b, p_ab = p_ao - p_bo for an observed o beyond b as seen from
/// a. Every alternative choice is then evaluated, and the completed matrix is
/// checked to be additive along paths; any discrepancy above `tolerance`
/// raises InconsistentInput.
inline PathSumMatrix recover_path_sums(const BlockGraph& g, const LabelledMatrix& p_obs, const ObservationMask& mask,
                                       double tolerance = kRecoveryTolerance) {
    const auto report = check_identifiable(g, mask);
    if (!report.identifiable) {
        std::string names;
        for (const auto& id : report.offending) names += (names.empty() ? "" : ", ") + id;
        throw Error(ErrorKind::NotIdentifiable, "latent nodes in fewer than three cliques: " + names);
    }
    const auto latent = mask.flags(g);
    const auto observed_ids = mask.observed(g);
    {
        auto given = p_obs.ids;
        std::sort(given.begin(), given.end());
        auto want = observed_ids;
        std::sort(want.begin(), want.end());
        if (given != want || p_obs.values.rows() != static_cast<Eigen::Index>(given.size()) ||
            p_obs.values.cols() != static_cast<Eigen::Index>(given.size())) {
            throw Error(ErrorKind::InvalidMask, "observed matrix does not cover exactly the observed nodes");
        }
    }
    const auto n = g.size();
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n),
                                                  std::numeric_limits<double>::quiet_NaN());
    const auto P = [&p](NodeIndex a, NodeIndex b) -> double& {
        return p(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    };
    std::vector<NodeIndex> observed;
    for (NodeIndex v = 0; v < n; ++v) {
        if (!latent[v]) observed.push_back(v);
    }
    for (NodeIndex a : observed) {
        for (NodeIndex b : observed) {
            P(a, b) = p_obs(g.id(a), g.id(b));
        }
    }
    const auto fail = [&](NodeIndex a, NodeIndex b, double x, double y) {
        throw Error(ErrorKind::InconsistentInput, "path sum between " + g.id(a) + " and " + g.id(b) +
                                                      " differs across anchors: " + std::to_string(x) + " vs " +
                                                      std::to_string(y));
    };

    for (NodeIndex a = 0; a < n; ++a) {
        if (!latent[a]) continue;
        const auto& dirs = g.cliques_of(a);
        // observed nodes grouped by the clique through which they are reached
        std::vector<std::vector<NodeIndex>> by_dir(dirs.size());
        for (NodeIndex o : observed) {
            const auto c = detail::direction(g, a, o);
            const auto k = static_cast<std::size_t>(std::find(dirs.begin(), dirs.end(), c) - dirs.begin());
            by_dir[k].push_back(o);
        }
        for (const auto& group : by_dir) {
            if (group.empty()) throw Error(ErrorKind::NotIdentifiable, "no observed node beyond " + g.id(a));
        }
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            std::vector<std::size_t> other;
            for (std::size_t e = 0; e < dirs.size(); ++e) {
                if (e != d) other.push_back(e);
            }
            const NodeIndex j = by_dir[other[0]].front();
            const NodeIndex y = by_dir[other[1]].front();
            for (NodeIndex o : by_dir[d]) {
                const double value = 0.5 * (P(o, j) + P(o, y) - P(j, y));
                // every pair of further directions and representatives
                for (std::size_t e1 = 0; e1 < other.size(); ++e1) {
                    for (std::size_t e2 = e1 + 1; e2 < other.size(); ++e2) {
                        for (NodeIndex jj : by_dir[other[e1]]) {
                            for (NodeIndex yy : by_dir[other[e2]]) {
                                const double alt = 0.5 * (P(o, jj) + P(o, yy) - P(jj, yy));
                                if (std::abs(alt - value) > tolerance) fail(a, o, value, alt);
                            }
                        }
                    }
                }
                P(a, o) = value;
                P(o, a) = value;
            }
        }
        P(a, a) = 0.0;
    }

    for (NodeIndex a = 0; a < n; ++a) {
        if (!latent[a]) continue;
        for (NodeIndex b = 0; b < n; ++b) {
            if (!latent[b] || b == a) continue;
            // observed nodes whose path from a runs through b
            double value = std::numeric_limits<double>::quiet_NaN();
            for (NodeIndex o : observed) {
                if (!g.on_path(a, o, b)) continue;
                const double alt = P(a, o) - P(b, o);
                if (std::isnan(value)) {
                    value = alt;
                } else if (std::abs(alt - value) > tolerance) {
                    fail(a, b, value, alt);
                }
            }
            if (std::isnan(value)) throw Error(ErrorKind::NotIdentifiable, "no observed node beyond " + g.id(b));
            P(a, b) = value;
        }
    }
    for (NodeIndex a = 0; a < n; ++a) {
        for (NodeIndex b = a + 1; b < n; ++b) {
            const double x = P(a, b);
            const double y = P(b, a);
            if (std::abs(x - y) > tolerance) fail(a, b, x, y);
        }
    }

    // additivity: p must equal the path sums of its own edge entries
    for (NodeIndex u = 0; u < n; ++u) {
        for (NodeIndex v : g.breadth_first_order(u)) {
            if (v == u) continue;
            const NodeIndex w = g.predecessor(u, v);
            const double sum = P(u, w) + P(w, v);
            if (std::abs(sum - P(u, v)) > tolerance) {
                fail(u, v, P(u, v), sum);
            }
        }
    }
    return PathSumMatrix{g.ids(), std::move(p)};
}

/// Edge parameters read off a path-sum matrix: delta2 on edge (a, b) is p_ab.
inline DeltaFamily recover_edge_params(const PathSumMatrix& p, std::shared_ptr<const BlockGraph> g) {
    std::vector<double> by_edge;
    for (const auto& e : g->edges()) by_edge.push_back(p(g->id(e.from), g->id(e.to)));
    return DeltaFamily::validate(std::move(g), std::move(by_edge));
}

/// Two distinct valid parameter families whose path sums agree on every
/// pair of nodes other than v. For v in two cliques the parameters on the
/// edges at v are lowered by eta in one clique and raised by eta in the
/// other; for v in one clique they are raised by eta. eta is halved until
/// the shifted family is valid. Throws InvalidMask when v lies in three or
/// more cliques.
inline std::pair<DeltaFamily, DeltaFamily> nonidentifiable_witness(const DeltaFamily& d, NodeIndex v,
                                                                   double eta = 0.1) {
    const auto& g = d.graph();
    if (v >= g.size()) throw Error(ErrorKind::UnknownNode, "node out of range");
    const auto& cs = g.cliques_of(v);
    if (cs.empty() || cs.size() >= 3) {
        throw Error(ErrorKind::InvalidMask, "node " + g.id(v) + " does not lie in one or two cliques");
    }
    const auto shifted = [&](double h) {
        auto by_edge = d.by_edge();
        for (std::size_t k = 0; k < cs.size(); ++k) {
            const double sign = cs.size() == 2 && k == 0 ? -1.0 : 1.0;
            for (NodeIndex w : g.cliques()[cs[k]]) {
                if (w != v) by_edge[*g.edge_index(v, w)] += sign * h;
            }
        }
        return by_edge;
    };
    for (int attempt = 0; attempt < 60; ++attempt, eta *= 0.5) {
        try {
            return {d, DeltaFamily::validate(d.graph_ptr(), shifted(eta))};
        } catch (const Error&) {
        }
    }
    throw Error(ErrorKind::NotCND, "no valid shift found");
}

}  // namespace extreme_blocks
