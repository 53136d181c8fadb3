#pragma once

#include <algorithm>
#include <cstdio>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "extreme_blocks/extreme_blocks.hpp"

namespace eb_test {

namespace eb = extreme_blocks;

using EdgeList = std::vector<std::pair<std::string, std::string>>;

inline std::vector<std::string> range_ids(int first, int last) {
    std::vector<std::string> out;
    for (int i = first; i <= last; ++i) out.push_back(std::to_string(i));
    return out;
}

inline EdgeList figure1_edges() {
    return {{"0", "1"}, {"1", "2"}, {"2", "0"}, {"2", "4"}, {"6", "2"}, {"2", "5"},
            {"4", "5"}, {"4", "6"}, {"3", "2"}, {"6", "7"}, {"6", "5"}};
}

inline std::shared_ptr<const eb::BlockGraph> figure1() {
    return std::make_shared<const eb::BlockGraph>(eb::BlockGraph::build(range_ids(0, 7), figure1_edges()));
}

inline EdgeList figure2_edges() {
    return {{"1", "2"}, {"2", "3"}, {"2", "4"}, {"3", "4"}, {"4", "5"}, {"4", "6"}, {"5", "6"}};
}

inline std::shared_ptr<const eb::BlockGraph> figure2() {
    return std::make_shared<const eb::BlockGraph>(eb::BlockGraph::build(range_ids(1, 6), figure2_edges()));
}

/// delta^2 on the figure 2 graph in the order 12, 23, 24, 34, 45, 46, 56.
inline eb::DeltaFamily figure2_params(std::shared_ptr<const eb::BlockGraph> g) {
    return eb::DeltaFamily::validate(g, std::map<std::pair<std::string, std::string>, double>{
                                            {{"1", "2"}, 0.9},
                                            {{"2", "3"}, 0.4},
                                            {{"2", "4"}, 0.7},
                                            {{"3", "4"}, 0.5},
                                            {{"4", "5"}, 0.8},
                                            {{"4", "6"}, 0.6},
                                            {{"5", "6"}, 1.1}});
}

inline eb::DeltaFamily figure1_params(std::shared_ptr<const eb::BlockGraph> g) {
    return eb::DeltaFamily::validate(g, std::map<std::pair<std::string, std::string>, double>{
                                            {{"0", "1"}, 0.9},
                                            {{"0", "2"}, 0.4},
                                            {{"1", "2"}, 0.7},
                                            {{"2", "3"}, 0.5},
                                            {{"2", "4"}, 0.8},
                                            {{"2", "5"}, 0.6},
                                            {{"2", "6"}, 1.1},
                                            {{"4", "5"}, 0.9},
                                            {{"4", "6"}, 0.7},
                                            {{"5", "6"}, 0.5},
                                            {{"6", "7"}, 0.6}});
}

inline EdgeList figure4_edges() {
    return {{"1", "2"}, {"1", "3"}, {"2", "3"}, {"3", "4"}, {"3", "5"},
            {"4", "5"}, {"3", "6"}, {"3", "7"}, {"6", "7"}};
}

inline std::shared_ptr<const eb::BlockGraph> figure4() {
    return std::make_shared<const eb::BlockGraph>(eb::BlockGraph::build(range_ids(1, 7), figure4_edges()));
}

struct RandomGraph {
    std::vector<std::string> nodes;
    EdgeList edges;
};

/// Random tree of cliques with sizes 2..5 and at most max_nodes nodes.
/// Identifiers are shuffled so that creation order and index order differ.
inline RandomGraph random_block_graph(std::mt19937_64& rng, std::size_t max_nodes) {
    std::uniform_int_distribution<std::size_t> size_dist(2, 5);
    std::vector<std::vector<std::size_t>> cliques;
    std::size_t count = std::min<std::size_t>(size_dist(rng), max_nodes);
    std::vector<std::size_t> first(count);
    for (std::size_t i = 0; i < count; ++i) first[i] = i;
    cliques.push_back(first);
    while (count < max_nodes) {
        const std::size_t extra = std::min<std::size_t>(size_dist(rng) - 1, max_nodes - count);
        const std::size_t attach = std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
        std::vector<std::size_t> members{attach};
        for (std::size_t i = 0; i < extra; ++i) members.push_back(count++);
        cliques.push_back(members);
        if (std::bernoulli_distribution(0.15)(rng)) break;
    }
    std::vector<std::size_t> label(count);
    for (std::size_t i = 0; i < count; ++i) label[i] = i;
    std::shuffle(label.begin(), label.end(), rng);
    const auto name = [&](std::size_t v) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "v%02zu", label[v]);
        return std::string(buf);
    };
    RandomGraph out;
    for (std::size_t v = 0; v < count; ++v) out.nodes.push_back(name(v));
    for (const auto& c : cliques) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            for (std::size_t j = i + 1; j < c.size(); ++j) out.edges.emplace_back(name(c[i]), name(c[j]));
        }
    }
    return out;
}

inline std::shared_ptr<const eb::BlockGraph> build(const RandomGraph& rg) {
    return std::make_shared<const eb::BlockGraph>(eb::BlockGraph::build(rg.nodes, rg.edges));
}

/// Valid parameters: within each clique, squared distances between random
/// points in general position, scaled into a unit range.
inline eb::DeltaFamily random_params(std::shared_ptr<const eb::BlockGraph> g, std::mt19937_64& rng,
                                     double scale = 0.5) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> by_edge(g->edges().size(), 0.0);
    for (const auto& c : g->cliques()) {
        const std::size_t k = c.size();
        std::vector<std::vector<double>> pts(k, std::vector<double>(k));
        for (auto& p : pts) {
            for (auto& x : p) x = z(rng);
        }
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                double d2 = 0.0;
                for (std::size_t m = 0; m < k; ++m) d2 += (pts[i][m] - pts[j][m]) * (pts[i][m] - pts[j][m]);
                by_edge[*g->edge_index(c[i], c[j])] = 0.05 + scale * d2 / static_cast<double>(k);
            }
        }
    }
    return eb::DeltaFamily::validate(std::move(g), std::move(by_edge));
}

}  // namespace eb_test
