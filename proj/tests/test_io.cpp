#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "support.hpp"

namespace eb = extreme_blocks;
namespace io = extreme_blocks::io;
using namespace eb_test;

namespace {

eb::ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const eb::Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return eb::ErrorKind::InvalidSample;
}

}  // namespace

TEST(GraphJson, ParseAndRoundTrip) {
    const auto g = io::parse_graph(R"({"nodes": ["a", "b", "c"], "edges": [["a", "b"], ["b", "c"]]})");
    EXPECT_EQ(g.size(), 3u);
    EXPECT_EQ(g.cliques().size(), 2u);
    const auto again = io::parse_graph(io::graph_to_json(g).dump());
    EXPECT_EQ(again.ids(), g.ids());
    ASSERT_EQ(again.edges().size(), g.edges().size());
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        EXPECT_EQ(again.edges()[e].from, g.edges()[e].from);
        EXPECT_EQ(again.edges()[e].to, g.edges()[e].to);
    }
}

TEST(GraphJson, Errors) {
    EXPECT_EQ(kind_of([] { io::parse_graph("{\"nodes\": [\"a\""); }), eb::ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { io::parse_graph(R"({"nodes": ["a"]})"); }), eb::ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { io::parse_graph(R"({"nodes": [1], "edges": []})"); }), eb::ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { io::parse_graph(R"({"nodes": ["a","b"], "edges": [["a"]]})"); }),
              eb::ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { io::read_graph("/nonexistent/graph.json"); }), eb::ErrorKind::ParseError);
}

TEST(ParamsJson, ParseAndRoundTrip) {
    const auto g = figure2();
    const auto d = figure2_params(g);
    const auto text = io::params_to_json(d).dump();
    const auto back = io::parse_params(text, g);
    EXPECT_EQ(back.by_edge(), d.by_edge());
    EXPECT_EQ(io::params_to_json(back).dump(), text);
}

TEST(ParamsJson, DuplicateAndMissing) {
    auto g = std::make_shared<const eb::BlockGraph>(eb::BlockGraph::build({"a", "b"}, {{"a", "b"}}));
    EXPECT_EQ(kind_of([&] {
                  io::parse_params(
                      R"({"edges": [{"a": "a", "b": "b", "delta2": 1}, {"a": "b", "b": "a", "delta2": 2}]})", g);
              }),
              eb::ErrorKind::DuplicateEdge);
    EXPECT_EQ(kind_of([&] { io::parse_params(R"({"edges": []})", g); }), eb::ErrorKind::MissingEdgeParam);
    EXPECT_EQ(kind_of([&] { io::parse_params(R"({"edges": [{"a": "a", "b": "b", "delta2": "x"}]})", g); }),
              eb::ErrorKind::ParseError);
}

TEST(MaskJson, RoundTrip) {
    const auto m = io::parse_mask(R"({"latent": ["3", "1"]})");
    EXPECT_EQ(m.latent(), (std::vector<std::string>{"1", "3"}));
    EXPECT_EQ(io::parse_mask(io::mask_to_json(m).dump()).latent(), m.latent());
    EXPECT_EQ(kind_of([] { io::parse_mask(R"({"latent": "3"})"); }), eb::ErrorKind::ParseError);
}

TEST(Csv, FormatDoubleRoundTrips) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = unif(rng) * std::pow(10.0, (i % 40) - 20);
        EXPECT_EQ(io::parse_double(io::format_double(v)), v);
    }
    EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(kind_of([] { io::parse_double("1.5x"); }), eb::ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { io::parse_double(""); }), eb::ErrorKind::ParseError);
}

TEST(Csv, ByteIdenticalRoundTrip) {
    const auto g = figure2();
    const auto p = eb::path_sum_matrix(figure2_params(g));
    const auto text = io::matrix_table(p).to_csv();
    const auto table = io::parse_csv(text);
    EXPECT_EQ(table.to_csv(), text);
    const auto back = io::table_matrix(table);
    EXPECT_EQ(back.ids, p.ids);
    EXPECT_TRUE(back.values == p.values);

    const io::CsvTable plain{{"x", "y"}, {}, (Eigen::MatrixXd(2, 2) << 1.5, -2, 1e-300, 3).finished()};
    EXPECT_EQ(io::parse_csv(plain.to_csv()).to_csv(), plain.to_csv());
    EXPECT_TRUE(io::parse_csv(plain.to_csv()).row_labels.empty());
}

TEST(Csv, Errors) {
    EXPECT_EQ(kind_of([] { io::parse_csv(""); }), eb::ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { io::parse_csv("a,b\n1\n"); }), eb::ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { io::parse_csv("a,b\n1,zz\n"); }), eb::ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { io::table_matrix(io::parse_csv("a,b\n1,2\n")); }), eb::ErrorKind::ParseError);
    // CRLF line endings are accepted
    EXPECT_EQ(io::parse_csv("a,b\r\n1,2\r\n").values(0, 1), 2.0);
}

TEST(Binary, RoundTripAndLayout) {
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, std::numeric_limits<double>::infinity();
    std::stringstream buf;
    io::write_binary(buf, m);
    const std::string bytes = buf.str();
    ASSERT_EQ(bytes.size(), 5u + 16u + 48u);
    EXPECT_EQ(bytes.substr(0, 5), "EBLK1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 2u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[13]), 3u);
    // row-major: the second value is m(0, 1) = 2.0 = 0x4000000000000000
    EXPECT_EQ(static_cast<unsigned char>(bytes[21 + 8 + 7]), 0x40u);
    const auto back = io::read_binary(buf);
    EXPECT_TRUE(back == m);
}

TEST(Binary, Errors) {
    std::stringstream bad("EBLK2xxxxxxxxxxxxxxxx");
    EXPECT_EQ(kind_of([&] { io::read_binary(bad); }), eb::ErrorKind::ParseError);
    std::stringstream good;
    io::write_binary(good, Eigen::MatrixXd::Ones(3, 3));
    std::stringstream truncated(good.str().substr(0, 40));
    EXPECT_EQ(kind_of([&] { io::read_binary(truncated); }), eb::ErrorKind::ParseError);
}

TEST(EvaluationRecord, Fields) {
    const auto rec = io::evaluation_record({{"command", "stdf"}}, 1.5, 1e-7, 42u);
    EXPECT_EQ(rec["query"]["command"], "stdf");
    EXPECT_EQ(rec["value"], 1.5);
    EXPECT_EQ(rec["error_estimate"], 1e-7);
    EXPECT_EQ(rec["seed"], 42u);
    EXPECT_TRUE(io::evaluation_record({}, 1, 0, std::nullopt)["seed"].is_null());
}
