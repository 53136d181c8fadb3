#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "extreme_blocks/error.hpp"

namespace extreme_blocks {

using NodeIndex = std::size_t;
inline constexpr NodeIndex kNoNode = std::numeric_limits<NodeIndex>::max();

/// An edge between two dense node indices. Canonical graph edges have
/// `from < to`; path edges keep their direction of travel.
struct Edge {
    NodeIndex from = kNoNode;
    NodeIndex to = kNoNode;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Connected undirected graph in which every biconnected component is complete.
///
/// Node identifiers are opaque strings; dense indices follow their sorted
/// order. Cliques, separators and the table of unique shortest paths are
/// computed once at construction and the object is immutable afterwards.
class BlockGraph {
public:
    /// Validates and builds a block graph.
    ///
    /// Throws Error with kind UnknownNode, SelfLoop, DuplicateEdge,
    /// Disconnected or NotBlockGraph. For NotBlockGraph the message names
    /// the node set of one offending block.
    static BlockGraph build(std::vector<std::string> nodes,
                            const std::vector<std::pair<std::string, std::string>>& edges) {
        BlockGraph g;
        std::sort(nodes.begin(), nodes.end());
        if (nodes.empty()) {
            throw Error(ErrorKind::Disconnected, "graph has no nodes");
        }
        if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
            throw Error(ErrorKind::ParseError, "duplicate node identifier");
        }
        g.ids_ = std::move(nodes);
        for (NodeIndex i = 0; i < g.ids_.size(); ++i) {
            g.lookup_.emplace(g.ids_[i], i);
        }

        const std::size_t n = g.ids_.size();
        g.adjacency_.assign(n, {});
        g.adjacent_.assign(n * n, false);
        for (const auto& [a, b] : edges) {
            NodeIndex ia = g.index(a);
            NodeIndex ib = g.index(b);
            if (ia == ib) {
                throw Error(ErrorKind::SelfLoop, "self-loop at node " + a);
            }
            if (ia > ib) std::swap(ia, ib);
            if (g.adjacent_[ia * n + ib]) {
                throw Error(ErrorKind::DuplicateEdge, "edge (" + a + ", " + b + ") listed twice");
            }
            g.adjacent_[ia * n + ib] = g.adjacent_[ib * n + ia] = true;
            g.edges_.push_back({ia, ib});
            g.adjacency_[ia].push_back(ib);
            g.adjacency_[ib].push_back(ia);
        }
        std::sort(g.edges_.begin(), g.edges_.end());
        for (auto& nb : g.adjacency_) std::sort(nb.begin(), nb.end());

        g.build_path_table();
        g.build_cliques();
        return g;
    }

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::string& id(NodeIndex v) const { return ids_.at(v); }

    NodeIndex index(std::string_view id) const {
        auto it = lookup_.find(id);
        if (it == lookup_.end()) {
            throw Error(ErrorKind::UnknownNode, "unknown node '" + std::string(id) + "'");
        }
        return it->second;
    }

    bool contains(std::string_view id) const { return lookup_.find(id) != lookup_.end(); }

    /// Canonical edges (from < to), sorted.
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    std::optional<std::size_t> edge_index(NodeIndex a, NodeIndex b) const {
        if (a > b) std::swap(a, b);
        auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{a, b});
        if (it == edges_.end() || *it != Edge{a, b}) return std::nullopt;
        return static_cast<std::size_t>(it - edges_.begin());
    }

    bool adjacent(NodeIndex a, NodeIndex b) const {
        check_node(a);
        check_node(b);
        return adjacent_[a * size() + b];
    }

    const std::vector<NodeIndex>& neighbours(NodeIndex v) const { return adjacency_.at(v); }

    /// Maximal cliques, each sorted; the list is sorted lexicographically.
    const std::vector<std::vector<NodeIndex>>& cliques() const noexcept { return cliques_; }

    /// Nodes that belong to two or more cliques, sorted.
    const std::vector<NodeIndex>& separators() const noexcept { return separators_; }

    /// Indices into `cliques()` of the cliques containing `v`.
    const std::vector<std::size_t>& cliques_of(NodeIndex v) const {
        check_node(v);
        return cliques_of_[v];
    }

    std::size_t clique_degree(NodeIndex v) const { return cliques_of(v).size(); }

    /// Index of the unique clique containing edge (a, b).
    std::size_t clique_of_edge(NodeIndex a, NodeIndex b) const {
        auto e = edge_index(a, b);
        if (!e) {
            throw Error(ErrorKind::UnknownNode, "no edge between " + id(a) + " and " + id(b));
        }
        return clique_of_edge_[*e];
    }

    /// Index of the clique whose node set equals `members` (any order).
    std::size_t find_clique(std::vector<NodeIndex> members) const {
        std::sort(members.begin(), members.end());
        auto it = std::lower_bound(cliques_.begin(), cliques_.end(), members);
        if (it == cliques_.end() || *it != members) {
            throw Error(ErrorKind::UnknownClique, "node set is not a maximal clique");
        }
        return static_cast<std::size_t>(it - cliques_.begin());
    }

    /// Number of edges on the shortest path from u to v.
    std::size_t distance(NodeIndex u, NodeIndex v) const {
        check_node(u);
        check_node(v);
        return distance_[u * size() + v];
    }

    /// The node preceding v on the shortest path from u; kNoNode when u == v.
    NodeIndex predecessor(NodeIndex u, NodeIndex v) const {
        check_node(u);
        check_node(v);
        return predecessor_[u * size() + v];
    }

    /// Directed edges of the unique shortest path from u to v; empty when u == v.
    std::vector<Edge> shortest_path(NodeIndex u, NodeIndex v) const {
        std::vector<Edge> path;
        for (NodeIndex w = v; w != u;) {
            NodeIndex p = predecessor(u, w);
            path.push_back({p, w});
            w = p;
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    /// Nodes of the shortest path from u to v, both endpoints included.
    std::vector<NodeIndex> path_nodes(NodeIndex u, NodeIndex v) const {
        std::vector<NodeIndex> nodes{v};
        for (NodeIndex w = v; w != u;) {
            w = predecessor(u, w);
            nodes.push_back(w);
        }
        std::reverse(nodes.begin(), nodes.end());
        return nodes;
    }

    /// True when w lies on the shortest path from u to v (endpoints included).
    bool on_path(NodeIndex u, NodeIndex v, NodeIndex w) const {
        return distance(u, w) + distance(w, v) == distance(u, v);
    }

    /// u itself if u belongs to the clique, otherwise the unique clique node
    /// through which every path from u into the clique passes.
    NodeIndex separator_node(NodeIndex u, std::size_t clique) const {
        check_node(u);
        if (clique >= cliques_.size()) {
            throw Error(ErrorKind::UnknownClique, "clique index out of range");
        }
        const auto& members = cliques_[clique];
        NodeIndex best = kNoNode;
        std::size_t best_dist = std::numeric_limits<std::size_t>::max();
        for (NodeIndex w : members) {
            if (distance(u, w) < best_dist) {
                best_dist = distance(u, w);
                best = w;
            }
        }
        return best;
    }

    /// Nodes ordered by distance from u (ties by index); u comes first.
    std::vector<NodeIndex> breadth_first_order(NodeIndex u) const {
        check_node(u);
        std::vector<NodeIndex> order(size());
        for (NodeIndex v = 0; v < size(); ++v) order[v] = v;
        std::stable_sort(order.begin(), order.end(), [&](NodeIndex a, NodeIndex b) {
            return distance(u, a) < distance(u, b);
        });
        return order;
    }

    /// Edges pointing away from u: (predecessor(u, v), v) for every v != u,
    /// listed in node-index order of v.
    std::vector<Edge> edges_away_from(NodeIndex u) const {
        std::vector<Edge> out;
        for (NodeIndex v = 0; v < size(); ++v) {
            if (v != u) out.push_back({predecessor(u, v), v});
        }
        return out;
    }

private:
    BlockGraph() = default;

    void check_node(NodeIndex v) const {
        if (v >= size()) {
            throw Error(ErrorKind::UnknownNode, "node index " + std::to_string(v) + " out of range");
        }
    }

    void build_path_table() {
        const std::size_t n = size();
        const auto unreached = std::numeric_limits<std::size_t>::max();
        distance_.assign(n * n, unreached);
        predecessor_.assign(n * n, kNoNode);
        for (NodeIndex u = 0; u < n; ++u) {
            std::deque<NodeIndex> queue{u};
            distance_[u * n + u] = 0;
            while (!queue.empty()) {
                NodeIndex a = queue.front();
                queue.pop_front();
                for (NodeIndex b : adjacency_[a]) {
                    if (distance_[u * n + b] == unreached) {
                        distance_[u * n + b] = distance_[u * n + a] + 1;
                        predecessor_[u * n + b] = a;
                        queue.push_back(b);
                    }
                }
            }
            for (NodeIndex v = 0; v < n; ++v) {
                if (distance_[u * n + v] == unreached) {
                    throw Error(ErrorKind::Disconnected,
                                "no path between " + ids_[u] + " and " + ids_[v]);
                }
            }
        }
    }

    // Biconnected components by Tarjan's edge-stack algorithm; each must be
    // complete, in which case it is a maximal clique.
    void build_cliques() {
        const std::size_t n = size();
        std::vector<std::size_t> disc(n, 0), low(n, 0);
        std::vector<Edge> edge_stack;
        std::vector<std::vector<NodeIndex>> blocks;
        std::size_t timer = 0;

        struct Frame {
            NodeIndex node;
            NodeIndex parent;
            std::size_t next;
        };
        std::vector<Frame> stack{{0, kNoNode, 0}};
        disc[0] = low[0] = ++timer;
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < adjacency_[f.node].size()) {
                NodeIndex w = adjacency_[f.node][f.next++];
                if (w == f.parent) continue;
                if (disc[w] == 0) {
                    edge_stack.push_back({f.node, w});
                    disc[w] = low[w] = ++timer;
                    stack.push_back({w, f.node, 0});
                } else if (disc[w] < disc[f.node]) {
                    edge_stack.push_back({f.node, w});
                    low[f.node] = std::min(low[f.node], disc[w]);
                }
                continue;
            }
            NodeIndex child = f.node;
            NodeIndex parent = f.parent;
            stack.pop_back();
            if (parent == kNoNode) continue;
            low[parent] = std::min(low[parent], low[child]);
            if (low[child] >= disc[parent]) {
                std::vector<NodeIndex> block;
                std::size_t edge_count = 0;
                while (true) {
                    Edge e = edge_stack.back();
                    edge_stack.pop_back();
                    ++edge_count;
                    block.push_back(e.from);
                    block.push_back(e.to);
                    if (e.from == parent && e.to == child) break;
                }
                std::sort(block.begin(), block.end());
                block.erase(std::unique(block.begin(), block.end()), block.end());
                const std::size_t k = block.size();
                if (edge_count != k * (k - 1) / 2) {
                    std::string names;
                    for (NodeIndex v : block) names += (names.empty() ? "" : ",") + ids_[v];
                    throw Error(ErrorKind::NotBlockGraph, "block {" + names + "} is not a clique");
                }
                blocks.push_back(std::move(block));
            }
        }

        std::sort(blocks.begin(), blocks.end());
        cliques_ = std::move(blocks);
        cliques_of_.assign(n, {});
        for (std::size_t c = 0; c < cliques_.size(); ++c) {
            for (NodeIndex v : cliques_[c]) cliques_of_[v].push_back(c);
        }
        for (NodeIndex v = 0; v < n; ++v) {
            if (cliques_of_[v].size() >= 2) separators_.push_back(v);
        }
        clique_of_edge_.assign(edges_.size(), 0);
        for (std::size_t c = 0; c < cliques_.size(); ++c) {
            const auto& members = cliques_[c];
            for (std::size_t i = 0; i < members.size(); ++i) {
                for (std::size_t j = i + 1; j < members.size(); ++j) {
                    clique_of_edge_[*edge_index(members[i], members[j])] = c;
                }
            }
        }
    }

    std::vector<std::string> ids_;
    std::map<std::string, NodeIndex, std::less<>> lookup_;
    std::vector<Edge> edges_;
    std::vector<std::vector<NodeIndex>> adjacency_;
    std::vector<bool> adjacent_;
    std::vector<std::size_t> distance_;
    std::vector<NodeIndex> predecessor_;
    std::vector<std::vector<NodeIndex>> cliques_;
    std::vector<std::vector<std::size_t>> cliques_of_;
    std::vector<NodeIndex> separators_;
    std::vector<std::size_t> clique_of_edge_;
};

}  // namespace extreme_blocks
