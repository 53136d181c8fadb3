#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "extreme_blocks/dist.hpp"
#include "extreme_blocks/error.hpp"
#include "extreme_blocks/linalg.hpp"
#include "extreme_blocks/model.hpp"
#include "extreme_blocks/rng.hpp"

namespace extreme_blocks {

/// n draws of the increments Z_e on the edges pointing away from the anchor.
/// Column e of `values` belongs to `edges[e]`; edges are grouped by clique.
struct IncrementSample {
    NodeIndex anchor = kNoNode;
    std::vector<Edge> edges;
    std::vector<std::size_t> clique;  // clique index of each edge
    Eigen::MatrixXd values;
};

/// n x |V| matrix of field values, columns in node-index order.
struct FieldSample {
    NodeIndex anchor = kNoNode;
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
};

/// Substream of the unit-Pareto radius; clique c uses substream c.
inline constexpr std::uint32_t kRadiusStream = 0xffffffffu;

namespace detail {

struct CliqueDraw {
    std::size_t clique = 0;
    NodeIndex separator = kNoNode;
    std::vector<NodeIndex> targets;
    Eigen::VectorXd mean;
    Eigen::MatrixXd chol;
};

struct SimulationPlan {
    NodeIndex anchor = kNoNode;
    std::size_t nodes = 0;
    std::vector<CliqueDraw> cliques;
    std::vector<NodeIndex> order;  // breadth-first from the anchor
    std::vector<NodeIndex> parent;
};

inline SimulationPlan make_plan(const DeltaFamily& d, NodeIndex u) {
    const auto& g = d.graph();
    if (u >= g.size()) throw Error(ErrorKind::UnknownNode, "anchor out of range");
    SimulationPlan plan;
    plan.anchor = u;
    plan.nodes = g.size();
    for (std::size_t c = 0; c < g.cliques().size(); ++c) {
        const NodeIndex s = g.separator_node(u, c);
        auto limit = clique_limit_params(d, c, s);
        plan.cliques.push_back({c, s, std::move(limit.targets), std::move(limit.mean), cholesky_lower(limit.cov)});
    }
    plan.order = g.breadth_first_order(u);
    plan.parent.resize(g.size(), kNoNode);
    for (NodeIndex v : plan.order) {
        if (v != u) plan.parent[v] = g.predecessor(u, v);
    }
    return plan;
}

/// Log increments of one draw, written to log_z[v] for every v != anchor.
inline void draw_log_increments(const SimulationPlan& plan, const CounterRng& rng, std::uint64_t draw,
                                std::vector<double>& log_z, Eigen::VectorXd& scratch) {
    for (const auto& c : plan.cliques) {
        const auto k = static_cast<Eigen::Index>(c.targets.size());
        scratch.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            scratch(i) = rng.normal(static_cast<std::uint32_t>(c.clique), draw, static_cast<std::uint32_t>(i));
        }
        const Eigen::VectorXd x = c.mean + c.chol * scratch;
        for (Eigen::Index i = 0; i < k; ++i) log_z[c.targets[static_cast<std::size_t>(i)]] = x(i);
    }
}

/// Log field ln A_uv of one draw: sums of log increments along the paths.
inline void draw_log_field(const SimulationPlan& plan, const CounterRng& rng, std::uint64_t draw,
                           std::vector<double>& log_z, std::vector<double>& log_a, Eigen::VectorXd& scratch) {
    draw_log_increments(plan, rng, draw, log_z, scratch);
    log_a[plan.anchor] = 0.0;
    for (NodeIndex v : plan.order) {
        if (v != plan.anchor) log_a[v] = log_a[plan.parent[v]] + log_z[v];
    }
}

inline unsigned resolve_threads(unsigned threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    return threads;
}

/// Calls body(begin, end) on contiguous chunks of [0, n) in parallel.
template <class Body>
void parallel_chunks(std::size_t n, unsigned threads, Body body) {
    threads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = std::min(n, t * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([=] { body(begin, end); });
    }
    for (auto& th : pool) th.join();
}

inline void check_count(std::size_t n) {
    if (n == 0) throw Error(ErrorKind::InvalidSample, "sample size must be at least 1");
}

}  // namespace detail

/// Independent draws of the clique increments for anchor u. Within a clique
/// C with separator s the vector (ln Z_sv, v in C \ s) is normal with the
/// clique limit mean and covariance; cliques are independent.
inline IncrementSample sample_increments(const DeltaFamily& d, NodeIndex u, std::size_t n, std::uint64_t seed,
                                         unsigned threads = 1) {
    detail::check_count(n);
    const auto plan = detail::make_plan(d, u);
    IncrementSample out;
    out.anchor = u;
    std::vector<NodeIndex> column_node;
    for (const auto& c : plan.cliques) {
        for (NodeIndex v : c.targets) {
            out.edges.push_back({c.separator, v});
            out.clique.push_back(c.clique);
            column_node.push_back(v);
        }
    }
    out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out.edges.size()));
    const CounterRng rng(seed);
    detail::parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> log_z(plan.nodes, 0.0);
        Eigen::VectorXd scratch;
        for (std::size_t i = begin; i < end; ++i) {
            detail::draw_log_increments(plan, rng, i, log_z, scratch);
            for (std::size_t e = 0; e < column_node.size(); ++e) {
                out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e)) =
                    std::exp(log_z[column_node[e]]);
            }
        }
    });
    return out;
}

/// n draws of the limiting field A_u: A_uv is the product of the increments
/// along the shortest path from u to v, and A_uu = 1.
inline FieldSample sample_limit_field(const DeltaFamily& d, NodeIndex u, std::size_t n, std::uint64_t seed,
                                      unsigned threads = 1) {
    detail::check_count(n);
    const auto plan = detail::make_plan(d, u);
    FieldSample out{u, d.graph().ids(), Eigen::MatrixXd(static_cast<Eigen::Index>(n),
                                                        static_cast<Eigen::Index>(plan.nodes))};
    const CounterRng rng(seed);
    detail::parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> log_z(plan.nodes, 0.0), log_a(plan.nodes, 0.0);
        Eigen::VectorXd scratch;
        for (std::size_t i = begin; i < end; ++i) {
            detail::draw_log_field(plan, rng, i, log_z, log_a, scratch);
            for (std::size_t v = 0; v < plan.nodes; ++v) {
                out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) =
                    v == u ? 1.0 : std::exp(log_a[v]);
            }
        }
    });
    return out;
}

/// n draws of Y = P A_u with P unit Pareto, the Pareto limit given Y_u > 1.
inline FieldSample sample_pareto_conditioned(const DeltaFamily& d, NodeIndex u, std::size_t n,
                                             std::uint64_t seed, unsigned threads = 1) {
    detail::check_count(n);
    const auto plan = detail::make_plan(d, u);
    FieldSample out{u, d.graph().ids(), Eigen::MatrixXd(static_cast<Eigen::Index>(n),
                                                        static_cast<Eigen::Index>(plan.nodes))};
    const CounterRng rng(seed);
    detail::parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> log_z(plan.nodes, 0.0), log_a(plan.nodes, 0.0);
        Eigen::VectorXd scratch;
        for (std::size_t i = begin; i < end; ++i) {
            detail::draw_log_field(plan, rng, i, log_z, log_a, scratch);
            const double radius = 1.0 / (1.0 - rng.uniform(kRadiusStream, i, 0));
            for (std::size_t v = 0; v < plan.nodes; ++v) {
                out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) =
                    v == u ? radius : radius * std::exp(log_a[v]);
            }
        }
    });
    return out;
}

/// Monte-Carlo stdf E[max_v x_v A_uv] with its standard error; x is indexed
/// by node index.
inline Estimate mc_stdf(const DeltaFamily& d, NodeIndex u, const std::vector<double>& x, std::size_t n,
                        std::uint64_t seed, unsigned threads = 1) {
    detail::check_count(n);
    if (x.size() != d.graph().size()) {
        throw Error(ErrorKind::DimensionMismatch, "weight vector does not match the node count");
    }
    for (double v : x) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw Error(ErrorKind::NonPositiveCoordinate, "stdf weights must be finite and nonnegative");
        }
    }
    const auto plan = detail::make_plan(d, u);
    std::vector<double> draws(n);
    const CounterRng rng(seed);
    detail::parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> log_z(plan.nodes, 0.0), log_a(plan.nodes, 0.0);
        Eigen::VectorXd scratch;
        for (std::size_t i = begin; i < end; ++i) {
            detail::draw_log_field(plan, rng, i, log_z, log_a, scratch);
            double best = x[u];
            for (std::size_t v = 0; v < plan.nodes; ++v) {
                if (v != u && x[v] > 0.0) best = std::max(best, x[v] * std::exp(log_a[v]));
            }
            draws[i] = best;
        }
    });
    double mean = 0.0;
    for (double v : draws) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : draws) ss += (v - mean) * (v - mean);
    const double se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    return {mean, se, true};
}

}  // namespace extreme_blocks
