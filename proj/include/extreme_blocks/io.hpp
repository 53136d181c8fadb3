#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "extreme_blocks/error.hpp"
#include "extreme_blocks/graph.hpp"
#include "extreme_blocks/latent.hpp"
#include "extreme_blocks/model.hpp"

namespace extreme_blocks::io {

using json = nlohmann::json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ParseError, "cannot write '" + path + "'");
    out << content;
    if (!out) throw Error(ErrorKind::ParseError, "failed writing '" + path + "'");
}

inline json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

namespace detail {

inline const json& member(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw Error(ErrorKind::ParseError, std::string("missing key '") + key + "'");
    }
    return obj.at(key);
}

inline std::string as_string(const json& v, const char* what) {
    if (!v.is_string()) throw Error(ErrorKind::ParseError, std::string(what) + " must be a string");
    return v.get<std::string>();
}

}  // namespace detail

// ---- graph ---------------------------------------------------------------

/// {"nodes": [id, ...], "edges": [[a, b], ...]}
inline BlockGraph parse_graph(const std::string& text) {
    const json doc = parse_json(text);
    const json& nodes = detail::member(doc, "nodes");
    const json& edges = detail::member(doc, "edges");
    if (!nodes.is_array() || !edges.is_array()) throw Error(ErrorKind::ParseError, "nodes and edges must be arrays");
    std::vector<std::string> ids;
    for (const auto& n : nodes) ids.push_back(detail::as_string(n, "node id"));
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& e : edges) {
        if (!e.is_array() || e.size() != 2) throw Error(ErrorKind::ParseError, "each edge must be a pair");
        pairs.emplace_back(detail::as_string(e[0], "edge end"), detail::as_string(e[1], "edge end"));
    }
    return BlockGraph::build(std::move(ids), pairs);
}

inline std::shared_ptr<const BlockGraph> read_graph(const std::string& path) {
    return std::make_shared<const BlockGraph>(parse_graph(read_file(path)));
}

inline json graph_to_json(const BlockGraph& g) {
    json edges = json::array();
    for (const auto& e : g.edges()) edges.push_back({g.id(e.from), g.id(e.to)});
    return {{"nodes", g.ids()}, {"edges", edges}};
}

// ---- parameters ----------------------------------------------------------

/// {"edges": [{"a": id, "b": id, "delta2": number}, ...]}
inline DeltaFamily parse_params(const std::string& text, std::shared_ptr<const BlockGraph> g) {
    const json doc = parse_json(text);
    const json& edges = detail::member(doc, "edges");
    if (!edges.is_array()) throw Error(ErrorKind::ParseError, "edges must be an array");
    std::map<std::pair<std::string, std::string>, double> by_pair;
    for (const auto& e : edges) {
        const auto a = detail::as_string(detail::member(e, "a"), "a");
        const auto b = detail::as_string(detail::member(e, "b"), "b");
        const json& v = detail::member(e, "delta2");
        if (!v.is_number()) throw Error(ErrorKind::ParseError, "delta2 must be a number");
        const auto key = a < b ? std::pair{a, b} : std::pair{b, a};
        if (!by_pair.emplace(key, v.get<double>()).second) {
            throw Error(ErrorKind::DuplicateEdge, "parameter for (" + a + ", " + b + ") given twice");
        }
    }
    return DeltaFamily::validate(std::move(g), by_pair);
}

inline DeltaFamily read_params(const std::string& path, std::shared_ptr<const BlockGraph> g) {
    return parse_params(read_file(path), std::move(g));
}

inline json params_to_json(const DeltaFamily& d) {
    json edges = json::array();
    const auto& g = d.graph();
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        edges.push_back({{"a", g.id(g.edges()[e].from)}, {"b", g.id(g.edges()[e].to)}, {"delta2", d.by_edge()[e]}});
    }
    return {{"edges", edges}};
}

// ---- observation mask ----------------------------------------------------

/// {"latent": [id, ...]}
inline ObservationMask parse_mask(const std::string& text) {
    const json doc = parse_json(text);
    const json& latent = detail::member(doc, "latent");
    if (!latent.is_array()) throw Error(ErrorKind::ParseError, "latent must be an array");
    std::vector<std::string> ids;
    for (const auto& v : latent) ids.push_back(detail::as_string(v, "latent node"));
    return ObservationMask(std::move(ids));
}

inline ObservationMask read_mask(const std::string& path) { return parse_mask(read_file(path)); }

inline json mask_to_json(const ObservationMask& m) { return {{"latent", m.latent()}}; }

// ---- CSV -----------------------------------------------------------------

/// 17 significant digits; parses back to the identical double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

inline double parse_double(const std::string& s) {
    if (s.empty()) throw Error(ErrorKind::ParseError, "empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw Error(ErrorKind::ParseError, "invalid number '" + s + "'");
    return v;
}

/// Numeric table with a header row and optional row labels. With row labels
/// the header starts with an empty cell.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::string> row_labels;
    Eigen::MatrixXd values;

    std::string to_csv() const {
        std::string out;
        if (!row_labels.empty()) out += ",";
        for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
        out += "\n";
        for (Eigen::Index r = 0; r < values.rows(); ++r) {
            if (!row_labels.empty()) out += row_labels[static_cast<std::size_t>(r)] + ",";
            for (Eigen::Index c = 0; c < values.cols(); ++c) out += (c ? "," : "") + format_double(values(r, c));
            out += "\n";
        }
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    CsvTable t;
    auto head = detail::split_line(line);
    const bool labelled = !head.empty() && head.front().empty();
    if (labelled) head.erase(head.begin());
    t.header = head;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = detail::split_line(line);
        if (labelled) {
            t.row_labels.push_back(cells.front());
            cells.erase(cells.begin());
        }
        if (cells.size() != t.header.size()) throw Error(ErrorKind::ParseError, "ragged CSV row");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_double(c));
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return t;
}

inline CsvTable matrix_table(const LabelledMatrix& m) { return {m.ids, m.ids, m.values}; }

inline LabelledMatrix table_matrix(const CsvTable& t) {
    if (t.row_labels != t.header || t.values.rows() != t.values.cols()) {
        throw Error(ErrorKind::ParseError, "CSV is not a square matrix with matching labels");
    }
    return {t.header, t.values};
}

// ---- binary matrix -------------------------------------------------------

inline constexpr std::array<char, 5> kBinaryMagic{'E', 'B', 'L', 'K', '1'};

/// Magic "EBLK1", rows and cols as little-endian u64, then row-major
/// little-endian f64 values.
inline void write_binary(std::ostream& out, const Eigen::MatrixXd& m) {
    const auto put_u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
    };
    out.write(kBinaryMagic.data(), kBinaryMagic.size());
    put_u64(static_cast<std::uint64_t>(m.rows()));
    put_u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::uint64_t bits = 0;
            const double v = m(r, c);
            std::memcpy(&bits, &v, sizeof bits);
            put_u64(bits);
        }
    }
}

inline Eigen::MatrixXd read_binary(std::istream& in) {
    std::array<char, 5> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kBinaryMagic) throw Error(ErrorKind::ParseError, "bad binary matrix header");
    const auto get_u64 = [&]() {
        std::array<unsigned char, 8> b{};
        in.read(reinterpret_cast<char*>(b.data()), b.size());
        if (!in) throw Error(ErrorKind::ParseError, "truncated binary matrix");
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
        return v;
    };
    const auto rows = get_u64();
    const auto cols = get_u64();
    if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw Error(ErrorKind::ParseError, "matrix too large");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const std::uint64_t bits = get_u64();
            double v = 0.0;
            std::memcpy(&v, &bits, sizeof v);
            m(r, c) = v;
        }
    }
    return m;
}

// ---- evaluation records --------------------------------------------------

/// {"query": ..., "value": v, "error_estimate": e, "seed": s}
inline json evaluation_record(json query, double value, double error, std::optional<std::uint64_t> seed) {
    json rec{{"query", std::move(query)}, {"value", value}, {"error_estimate", error}};
    rec["seed"] = seed ? json(*seed) : json(nullptr);
    return rec;
}

}  // namespace extreme_blocks::io
