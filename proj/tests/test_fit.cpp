#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

namespace eb = extreme_blocks;
using namespace eb_test;

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

eb::ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const eb::Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return eb::ErrorKind::ParseError;
}

std::vector<eb::AnchorMoments> exact_moments(const eb::DeltaFamily& d, double scale = 1.0) {
    std::vector<eb::AnchorMoments> out;
    for (eb::NodeIndex u = 0; u < d.graph().size(); ++u) {
        const auto lim = eb::gaussian_limit(d, u);
        out.push_back({u, scale * lim.mean, scale * lim.cov, 100, 101});
    }
    return out;
}

// Exhaustive search over passive sets: least squares on each subset of
// columns, keeping the best feasible solution.
Eigen::VectorXd brute_force_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const auto n = a.cols();
    Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
    double best_val = b.squaredNorm();
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (mask & (1u << j)) cols.push_back(j);
        }
        Eigen::MatrixXd sub(a.rows(), ix(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) sub.col(ix(k)) = a.col(cols[k]);
        const Eigen::VectorXd s = sub.colPivHouseholderQr().solve(b);
        if ((s.array() < 0).any()) continue;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < cols.size(); ++k) x(cols[k]) = s(ix(k));
        const double val = (a * x - b).squaredNorm();
        if (val < best_val) {
            best_val = val;
            best = x;
        }
    }
    return best;
}

}  // namespace

TEST(RankTransform, DirectFormula) {
    eb::SampleSet s{{"a"}, (Eigen::MatrixXd(3, 1) << 3, 1, 2).finished(), eb::Scale::Raw};
    const auto t = eb::rank_transform(s);
    EXPECT_EQ(t.scale, eb::Scale::Pareto);
    EXPECT_DOUBLE_EQ(t.data(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(t.data(1, 0), 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(t.data(2, 0), 2.0);
}

TEST(RankTransform, ExtremesAndTies) {
    eb::SampleSet s{{"a", "b"}, (Eigen::MatrixXd(5, 2) << 5, 1, 2, 1, 9, 3, 0, 7, 4, 1).finished(), eb::Scale::Raw};
    const auto t = eb::rank_transform(s);
    EXPECT_DOUBLE_EQ(t.data(2, 0), 6.0);
    EXPECT_DOUBLE_EQ(t.data(3, 0), 6.0 / 5.0);
    // three tied values share rank 2
    for (Eigen::Index r : {0, 1, 4}) EXPECT_DOUBLE_EQ(t.data(r, 1), 6.0 / 4.0);
    EXPECT_DOUBLE_EQ(t.data(3, 1), 6.0);
}

TEST(RankTransform, InvariantUnderMonotoneMaps) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(50, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = z(rng);
    Eigen::MatrixXd y = x;
    y.col(0) = x.col(0).array().exp();
    y.col(1) = x.col(1).array().cube() * 3.0 + 1.0;
    y.col(2) = x.col(2).array().atan();
    const auto a = eb::rank_transform({{"a", "b", "c"}, x, eb::Scale::Raw});
    const auto b = eb::rank_transform({{"a", "b", "c"}, y, eb::Scale::Raw});
    EXPECT_TRUE(a.data == b.data);
}

TEST(RankTransform, Errors) {
    EXPECT_EQ(kind_of([] { eb::rank_transform({{"a"}, Eigen::MatrixXd::Ones(4, 1), eb::Scale::Raw}); }),
              eb::ErrorKind::ConstantColumn);
    EXPECT_EQ(kind_of([] { eb::rank_transform({{"a"}, Eigen::MatrixXd::Ones(1, 1), eb::Scale::Raw}); }),
              eb::ErrorKind::InvalidSample);
    Eigen::MatrixXd bad(3, 1);
    bad << 1, std::nan(""), 2;
    EXPECT_EQ(kind_of([&] { eb::rank_transform({{"a"}, bad, eb::Scale::Raw}); }), eb::ErrorKind::InvalidSample);
}

TEST(LogSpacings, ExactFactorization) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unif(0.1, 5.0);
    const std::size_t n = 20;
    Eigen::MatrixXd data(ix(n), 3);
    Eigen::MatrixXd a(ix(n), 2);
    for (Eigen::Index i = 0; i < ix(n); ++i) {
        data(i, 1) = 1.0 + static_cast<double>(i) * 0.37;
        a(i, 0) = unif(rng);
        a(i, 1) = unif(rng);
        data(i, 0) = a(i, 0) * data(i, 1);
        data(i, 2) = a(i, 1) * data(i, 1);
    }
    const auto sp = eb::log_spacings({{"x", "u", "y"}, data, eb::Scale::Pareto}, 1, 5);
    ASSERT_EQ(sp.rows.rows(), 5);
    for (Eigen::Index r = 0; r < 5; ++r) {
        // largest anchor values are the last rows
        const Eigen::Index src = ix(n) - 1 - r;
        EXPECT_NEAR(sp.rows(r, 0), std::log(a(src, 0)), 1e-14);
        EXPECT_NEAR(sp.rows(r, 1), std::log(a(src, 1)), 1e-14);
    }
}

TEST(LogSpacings, KRangeAndTieBreak) {
    Eigen::MatrixXd data(4, 2);
    data << 2, 1, 5, 2, 5, 3, 1, 4;
    const eb::SampleSet s{{"u", "v"}, data, eb::Scale::Pareto};
    const auto all = eb::log_spacings(s, 0, 3);
    ASSERT_EQ(all.rows.rows(), 3);
    // rows 1 and 2 tie on the anchor; row 1 comes first, the smallest (row 3) is dropped
    EXPECT_DOUBLE_EQ(all.rows(0, 0), std::log(2.0 / 5.0));
    EXPECT_DOUBLE_EQ(all.rows(1, 0), std::log(3.0 / 5.0));
    EXPECT_DOUBLE_EQ(all.rows(2, 0), std::log(1.0 / 2.0));
    EXPECT_EQ(kind_of([&] { eb::log_spacings(s, 0, 4); }), eb::ErrorKind::KOutOfRange);
    EXPECT_EQ(kind_of([&] { eb::log_spacings(s, 0, 0); }), eb::ErrorKind::KOutOfRange);
    EXPECT_EQ(kind_of([&] { eb::log_spacings({{"u", "v"}, data, eb::Scale::Raw}, 0, 2); }),
              eb::ErrorKind::InvalidSample);
}

TEST(LogSpacings, ConditionedSampleMeans) {
    const auto g = figure2();
    const auto d = figure2_params(g);
    const auto p = eb::path_sum_matrix(d);
    const std::size_t n = 50000;
    for (eb::NodeIndex u : {0ul, 3ul}) {
        const auto y = eb::sample_pareto_conditioned(d, u, n, 300 + u);
        const auto sp = eb::log_spacings({y.ids, y.values, eb::Scale::Pareto}, u, n / 2);
        const auto others = eb::nodes_except(g->size(), u);
        for (std::size_t c = 0; c < others.size(); ++c) {
            const Eigen::ArrayXd col = sp.rows.col(ix(c)).array();
            const double se = std::sqrt((col - col.mean()).square().sum() / static_cast<double>(col.size() - 1) /
                                        static_cast<double>(col.size()));
            EXPECT_NEAR(col.mean(), -2 * p.values(ix(u), ix(others[c])), 4 * se);
        }
    }
}

TEST(Nnls, MatchesBruteForce) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index m = 8, n = 5;
        Eigen::MatrixXd a(m, n);
        Eigen::VectorXd b(m);
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = z(rng);
        for (Eigen::Index i = 0; i < m; ++i) b(i) = z(rng);
        const auto sol = eb::nnls(a, b);
        EXPECT_TRUE(sol.converged);
        EXPECT_GE(sol.x.minCoeff(), 0.0);
        const Eigen::VectorXd truth = brute_force_nnls(a, b);
        EXPECT_LE((sol.x - truth).cwiseAbs().maxCoeff(), 1e-9) << rep;
        EXPECT_NEAR(sol.residual_norm2, (a * truth - b).squaredNorm(), 1e-9);
    }
}

TEST(Nnls, KktConditions) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index m = 40, n = 15;
        Eigen::MatrixXd a(m, n);
        Eigen::VectorXd b(m);
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = z(rng);
        for (Eigen::Index i = 0; i < m; ++i) b(i) = z(rng);
        const auto sol = eb::nnls(a, b);
        const Eigen::VectorXd grad = a.transpose() * (b - a * sol.x);
        const double scale = std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff());
        for (Eigen::Index j = 0; j < n; ++j) {
            EXPECT_GE(sol.x(j), 0.0);
            EXPECT_LE(grad(j), 1e-10 * scale);
            if (sol.x(j) > 0) EXPECT_LE(std::abs(grad(j)), 1e-9 * scale);
        }
    }
}

TEST(FitDelta, ExactCovariancesRecoverTruth) {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        const auto g = build(random_block_graph(rng, 12));
        const auto d = random_params(g, rng);
        const auto fit = eb::fit_from_moments(*g, exact_moments(d));
        EXPECT_LE(fit.objective, 1e-18);
        for (std::size_t e = 0; e < d.by_edge().size(); ++e) EXPECT_NEAR(fit.delta2[e], d.by_edge()[e], 1e-10);
        EXPECT_EQ(fit.anchors.size(), g->size());
    }
}

TEST(FitDelta, SingleEdge) {
    auto g = std::make_shared<const eb::BlockGraph>(eb::BlockGraph::build({"a", "b"}, {{"a", "b"}}));
    const std::vector<eb::AnchorMoments> ms{{0, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 2.6), 10, 11}};
    const auto fit = eb::fit_from_moments(*g, ms);
    EXPECT_NEAR(fit.delta2[0], 2.6 / 4, 1e-14);
}

TEST(FitDelta, UnderdeterminedNamesEdges) {
    const auto g = figure2();
    const auto d = figure2_params(g);
    eb::FitOptions opts;
    for (eb::NodeIndex u = 0; u < g->size(); ++u) opts.anchor_weights[u] = 0.0;
    try {
        eb::fit_from_moments(*g, exact_moments(d), opts);
        FAIL();
    } catch (const eb::Error& e) {
        EXPECT_EQ(e.kind(), eb::ErrorKind::Underdetermined);
        EXPECT_NE(std::string(e.what()).find("(5,6)"), std::string::npos);
    }
    EXPECT_EQ(kind_of([&] { eb::fit_from_moments(*g, {}); }), eb::ErrorKind::Underdetermined);
}

TEST(FitDelta, MeanConditionAgrees) {
    const auto g = figure2();
    const auto d = figure2_params(g);
    eb::FitOptions opts;
    opts.use_mean = true;
    opts.mean_weight = 2.0;
    const auto fit = eb::fit_from_moments(*g, exact_moments(d), opts);
    for (std::size_t e = 0; e < d.by_edge().size(); ++e) EXPECT_NEAR(fit.delta2[e], d.by_edge()[e], 1e-10);
}

TEST(FitDelta, ClampsNegativeTargets) {
    auto g = std::make_shared<const eb::BlockGraph>(eb::BlockGraph::build({"a", "b"}, {{"a", "b"}}));
    const std::vector<eb::AnchorMoments> ms{{0, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, -1.0), 10, 11}};
    const auto fit = eb::fit_from_moments(*g, ms);
    EXPECT_EQ(fit.delta2[0], 0.0);
    EXPECT_NEAR(fit.objective, 1.0, 1e-15);
}

TEST(FitProperties, Equivariance) {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 10; ++rep) {
        const auto g = build(random_block_graph(rng, 10));
        const auto d = random_params(g, rng);
        for (double c : {0.5, 3.0}) {
            const auto fit = eb::fit_from_moments(*g, exact_moments(d, c));
            for (std::size_t e = 0; e < d.by_edge().size(); ++e) {
                EXPECT_NEAR(fit.delta2[e], c * d.by_edge()[e], 1e-10 * c);
            }
        }
    }
}

TEST(FitProperties, ObjectiveConvexOnSegments) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> unif(0.0, 2.0);
    const auto g = figure2();
    const auto d = figure2_params(g);
    // perturbed moments so the minimum is not zero
    auto ms = exact_moments(d);
    for (auto& m : ms) m.cov += 0.1 * Eigen::MatrixXd::Ones(m.cov.rows(), m.cov.cols());
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> a(g->edges().size()), b(a.size()), mid(a.size());
        for (std::size_t e = 0; e < a.size(); ++e) {
            a[e] = unif(rng);
            b[e] = unif(rng);
            mid[e] = 0.5 * (a[e] + b[e]);
        }
        const double fa = eb::fit_objective(*g, ms, a), fb = eb::fit_objective(*g, ms, b);
        EXPECT_LE(eb::fit_objective(*g, ms, mid), 0.5 * (fa + fb) + 1e-12 * (fa + fb));
    }
}

TEST(FitProperties, FullRankOnGeneratedGraphs) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const auto g = build(random_block_graph(rng, 15));
        if (g->edges().empty()) continue;
        const auto d = random_params(g, rng);
        const auto prob = eb::detail::stack_moments(*g, exact_moments(d), {});
        Eigen::FullPivLU<Eigen::MatrixXd> lu(prob.design);
        EXPECT_EQ(lu.rank(), ix(g->edges().size()));
    }
}

TEST(FitDelta, SpacingsPipeline) {
    const auto g = figure2();
    const auto d = figure2_params(g);
    std::vector<eb::AnchorSpacings> sp;
    for (eb::NodeIndex u = 0; u < g->size(); ++u) {
        const auto y = eb::sample_pareto_conditioned(d, u, 20000, 500 + u);
        sp.push_back(eb::log_spacings({y.ids, y.values, eb::Scale::Pareto}, u, 19999));
    }
    const auto fit = eb::fit_delta(*g, sp);
    for (std::size_t e = 0; e < d.by_edge().size(); ++e) {
        EXPECT_NEAR(fit.delta2[e], d.by_edge()[e], 0.1 * d.by_edge()[e]) << e;
    }
    EXPECT_EQ(fit.anchors[2].k, 19999u);
    EXPECT_EQ(fit.anchors[2].sample_rows, 20000u);
}
