#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "extreme_blocks/extreme_blocks.hpp"

namespace eb = extreme_blocks;
using eb::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Config {
    std::string graph;
    std::string params;
    std::string latent;
    std::string input;
    std::string anchor;
    std::size_t n = 1000;
    std::vector<std::size_t> k;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::optional<double> tol;
    std::string out;
    std::string format = "csv";
    std::vector<std::string> subset;
    std::vector<double> weights;
    std::vector<double> point;
    std::string kind = "field";
    std::string method = "exact";
    bool pareto_input = false;
};

int exit_code(eb::ErrorKind kind) {
    switch (kind) {
        case eb::ErrorKind::ParseError:
            return kExitUsage;
        case eb::ErrorKind::NotPD:
        case eb::ErrorKind::SingularBlock:
        case eb::ErrorKind::DifferentiationUnstable:
        case eb::ErrorKind::Underdetermined:
            return kExitNumerical;
        default:
            return kExitValidation;
    }
}

void emit(const std::string& content, const std::string& path) {
    if (path.empty()) {
        std::cout << content;
    } else {
        eb::io::write_file(path, content);
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Path of `name` inside the output directory, created on demand; empty
/// when no directory was given.
std::string out_file(const std::string& dir, const std::string& name) {
    if (dir.empty()) return "";
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / name).string();
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::string> ids_of(const eb::BlockGraph& g, const std::vector<eb::NodeIndex>& nodes) {
    std::vector<std::string> out;
    for (auto v : nodes) out.push_back(g.id(v));
    return out;
}

std::shared_ptr<const eb::BlockGraph> need_graph(const Config& c) {
    if (c.graph.empty()) throw CLI::RequiredError("--graph");
    return eb::io::read_graph(c.graph);
}

eb::DeltaFamily need_params(const Config& c, std::shared_ptr<const eb::BlockGraph> g) {
    if (c.params.empty()) throw CLI::RequiredError("--params");
    return eb::io::read_params(c.params, std::move(g));
}

eb::NodeIndex need_anchor(const Config& c, const eb::BlockGraph& g) {
    if (c.anchor.empty()) throw CLI::RequiredError("--anchor");
    return g.index(c.anchor);
}

std::uint64_t need_seed(const Config& c) {
    if (!c.seed) throw CLI::RequiredError("--seed");
    return *c.seed;
}

eb::MvnOptions mvn_options(const Config& c) {
    eb::MvnOptions opts;
    if (c.tol) opts.rel_tol = *c.tol;
    if (c.seed) opts.seed = *c.seed;
    return opts;
}

// ---- validate --------------------------------------------------------------

int cmd_validate(const Config& c) {
    json report;
    std::shared_ptr<const eb::BlockGraph> g;
    try {
        g = need_graph(c);
    } catch (const eb::Error& e) {
        if (e.kind() == eb::ErrorKind::ParseError) throw;
        report = {{"valid", false}, {"error", eb::to_string(e.kind())}, {"message", e.what()}};
        std::cout << dump(report);
        return kExitValidation;
    }
    json cliques = json::array();
    for (const auto& cl : g->cliques()) cliques.push_back(ids_of(*g, cl));
    report = {{"valid", true},
              {"nodes", g->ids()},
              {"cliques", cliques},
              {"separators", ids_of(*g, g->separators())}};
    if (!c.params.empty()) {
        try {
            const auto d = eb::io::read_params(c.params, g);
            json cnd = json::array();
            for (const auto& cl : g->cliques()) cnd.push_back({{"clique", ids_of(*g, cl)}, {"cnd", true}});
            report["cnd"] = cnd;
        } catch (const eb::Error& e) {
            if (e.kind() == eb::ErrorKind::ParseError) throw;
            report["valid"] = false;
            report["error"] = eb::to_string(e.kind());
            report["message"] = e.what();
            std::cout << dump(report);
            return kExitValidation;
        }
    }
    if (c.format == "json") {
        std::cout << dump(report);
    } else {
        std::cout << "valid: yes\ncliques: " << g->cliques().size() << "\n";
        for (const auto& cl : report["cliques"]) std::cout << "  " << cl.dump() << "\n";
        std::cout << "separators: " << report["separators"].dump() << "\n";
        if (report.contains("cnd")) std::cout << "cnd: all cliques pass\n";
    }
    return kExitOk;
}

// ---- params ----------------------------------------------------------------

int cmd_params(const Config& c) {
    const auto g = need_graph(c);
    const auto d = need_params(c, g);
    const auto u = need_anchor(c, *g);
    const auto p = eb::path_sum_matrix(d);
    const auto limit = eb::gaussian_limit(p.values, u);
    const auto theta = eb::precision_matrix(d, u);
    const auto check = eb::extremal_graph_check(d, c.tol.value_or(eb::kPrecisionZeroTolerance));
    const auto others = ids_of(*g, limit.others);

    if (c.format == "json") {
        json doc{{"anchor", c.anchor},
                 {"ids", g->ids()},
                 {"others", others},
                 {"path_sums", matrix_json(p.values)},
                 {"mean", std::vector<double>(limit.mean.data(), limit.mean.data() + limit.mean.size())},
                 {"covariance", matrix_json(limit.cov)},
                 {"precision", matrix_json(theta)},
                 {"max_violation", check.max_violation},
                 {"passed", check.passed}};
        emit(dump(doc), out_file(c.out, "params.json"));
        if (!c.out.empty()) std::cout << "max_violation " << eb::io::format_double(check.max_violation) << "\n";
        return kExitOk;
    }
    const eb::io::CsvTable p_csv{p.ids, p.ids, p.values};
    const eb::io::CsvTable mu_csv{others, {}, limit.mean.transpose()};
    const eb::io::CsvTable sigma_csv{others, others, limit.cov};
    const eb::io::CsvTable theta_csv{others, others, theta};
    if (c.out.empty()) {
        std::cout << "# P\n" << p_csv.to_csv() << "# mu\n" << mu_csv.to_csv() << "# Sigma\n"
                  << sigma_csv.to_csv() << "# Theta\n" << theta_csv.to_csv();
    } else {
        const std::filesystem::path dir(c.out);
        std::filesystem::create_directories(dir);
        eb::io::write_file((dir / "P.csv").string(), p_csv.to_csv());
        eb::io::write_file((dir / ("mu_" + c.anchor + ".csv")).string(), mu_csv.to_csv());
        eb::io::write_file((dir / ("Sigma_" + c.anchor + ".csv")).string(), sigma_csv.to_csv());
        eb::io::write_file((dir / ("Theta_" + c.anchor + ".csv")).string(), theta_csv.to_csv());
    }
    std::cout << "max_violation " << eb::io::format_double(check.max_violation) << "\n";
    return kExitOk;
}

// ---- simulate --------------------------------------------------------------

int cmd_simulate(const Config& c) {
    const auto g = need_graph(c);
    const auto d = need_params(c, g);
    const auto u = need_anchor(c, *g);
    const auto seed = need_seed(c);
    eb::FieldSample s;
    if (c.kind == "field") {
        s = eb::sample_limit_field(d, u, c.n, seed, c.threads);
    } else {
        s = eb::sample_pareto_conditioned(d, u, c.n, seed, c.threads);
    }
    if (c.format == "binary") {
        std::ostringstream buf;
        eb::io::write_binary(buf, s.values);
        emit(buf.str(), c.out);
    } else if (c.format == "json") {
        json doc{{"query", {{"command", "simulate"}, {"kind", c.kind}, {"anchor", c.anchor}, {"n", c.n}}},
                 {"seed", seed},
                 {"ids", s.ids},
                 {"values", matrix_json(s.values)}};
        emit(dump(doc), c.out);
    } else {
        emit(eb::io::CsvTable{s.ids, {}, s.values}.to_csv(), c.out);
    }
    return kExitOk;
}

// ---- evaluations -----------------------------------------------------------

int report_value(const Config& c, const json& query, const eb::Estimate& est, std::optional<std::uint64_t> seed) {
    if (c.format == "json") {
        auto rec = eb::io::evaluation_record(query, est.value, est.error, seed);
        rec["converged"] = est.converged;
        emit(dump(rec), c.out);
    } else {
        emit("value,error_estimate\n" + eb::io::format_double(est.value) + "," + eb::io::format_double(est.error) +
                 "\n",
             c.out);
    }
    if (!est.converged) {
        std::cerr << "warning: requested tolerance not reached\n";
        return kExitNumerical;
    }
    return kExitOk;
}

std::vector<std::string> subset_or_all(const Config& c, const eb::BlockGraph& g) {
    if (c.subset.empty()) return g.ids();
    for (const auto& id : c.subset) g.index(id);
    return c.subset;
}

int cmd_stdf(const Config& c) {
    const auto g = need_graph(c);
    const auto d = need_params(c, g);
    const auto subset = subset_or_all(c, *g);
    std::vector<double> weights = c.weights.empty() ? std::vector<double>(subset.size(), 1.0) : c.weights;
    if (weights.size() != subset.size()) throw CLI::ValidationError("--weights", "one weight per subset node");
    std::vector<double> y(g->size(), 0.0);
    for (std::size_t i = 0; i < subset.size(); ++i) y[g->index(subset[i])] = weights[i];
    json query{{"command", "stdf"}, {"method", c.method}, {"subset", subset}, {"weights", weights}};
    if (c.method == "mc") {
        const auto u = need_anchor(c, *g);
        const auto seed = need_seed(c);
        query["anchor"] = c.anchor;
        query["n"] = c.n;
        return report_value(c, query, eb::mc_stdf(d, u, y, c.n, seed, c.threads), seed);
    }
    const auto opts = mvn_options(c);
    const auto est = eb::stdf_hr({eb::path_sum_matrix(d), y}, opts);
    return report_value(c, query, est, opts.seed);
}

int cmd_pareto_cdf(const Config& c) {
    const auto g = need_graph(c);
    const auto d = need_params(c, g);
    const auto subset = subset_or_all(c, *g);
    if (c.point.size() != subset.size()) throw CLI::ValidationError("--point", "one coordinate per subset node");
    const auto p = eb::path_sum_matrix(d).restrict(subset);
    const auto opts = mvn_options(c);
    const auto est = eb::pareto_cdf(p, c.point, opts);
    return report_value(c, {{"command", "pareto-cdf"}, {"subset", subset}, {"point", c.point}}, est, opts.seed);
}

int cmd_ec(const Config& c) {
    const auto g = need_graph(c);
    const auto d = need_params(c, g);
    const auto subset = subset_or_all(c, *g);
    const auto opts = mvn_options(c);
    const auto est = eb::extremal_coefficient(d, subset, opts);
    return report_value(c, {{"command", "ec"}, {"subset", subset}}, est, opts.seed);
}

// ---- fit -------------------------------------------------------------------

int cmd_fit(const Config& c) {
    const auto g = need_graph(c);
    if (c.input.empty()) throw CLI::RequiredError("--input");
    if (c.k.empty()) throw CLI::RequiredError("--k");
    const auto table = eb::io::parse_csv(eb::io::read_file(c.input));
    if (!table.row_labels.empty()) throw eb::Error(eb::ErrorKind::ParseError, "sample CSV must not have row labels");
    eb::SampleSet raw{table.header, table.values, c.pareto_input ? eb::Scale::Pareto : eb::Scale::Raw};
    raw = raw.aligned_to(*g);
    const auto sample = c.pareto_input ? raw : eb::rank_transform(raw);
    std::vector<eb::NodeIndex> anchors;
    if (c.anchor.empty()) {
        for (eb::NodeIndex v = 0; v < g->size(); ++v) anchors.push_back(v);
    } else {
        anchors.push_back(g->index(c.anchor));
    }
    eb::FitOptions opts;
    if (c.tol) opts.kkt_tolerance = *c.tol;

    std::vector<std::string> edge_names;
    for (const auto& e : g->edges()) edge_names.push_back(g->id(e.from) + "-" + g->id(e.to));
    json fits = json::array();
    eb::io::CsvTable sweep;
    sweep.header = {"k", "objective"};
    sweep.header.insert(sweep.header.end(), edge_names.begin(), edge_names.end());
    sweep.values.resize(static_cast<Eigen::Index>(c.k.size()), static_cast<Eigen::Index>(sweep.header.size()));
    for (std::size_t i = 0; i < c.k.size(); ++i) {
        std::vector<eb::AnchorSpacings> spacings;
        for (auto u : anchors) spacings.push_back(eb::log_spacings(sample, u, c.k[i]));
        const auto fit = eb::fit_delta(*g, spacings, opts);
        json edges = json::array();
        for (std::size_t e = 0; e < g->edges().size(); ++e) {
            edges.push_back(
                {{"a", g->id(g->edges()[e].from)}, {"b", g->id(g->edges()[e].to)}, {"delta2", fit.delta2[e]}});
        }
        json diag = json::array();
        for (const auto& a : fit.anchors) {
            diag.push_back({{"anchor", g->id(a.anchor)}, {"k", a.k}, {"sample_rows", a.sample_rows}});
        }
        fits.push_back({{"k", c.k[i]}, {"objective", fit.objective}, {"params", {{"edges", edges}}}, {"anchors", diag}});
        const auto r = static_cast<Eigen::Index>(i);
        sweep.values(r, 0) = static_cast<double>(c.k[i]);
        sweep.values(r, 1) = fit.objective;
        for (std::size_t e = 0; e < fit.delta2.size(); ++e) sweep.values(r, static_cast<Eigen::Index>(e + 2)) = fit.delta2[e];
    }
    const json doc{{"query", {{"command", "fit"}, {"input", c.input}, {"k", c.k}}}, {"fits", fits}};
    if (!c.out.empty()) {
        const std::filesystem::path dir(c.out);
        std::filesystem::create_directories(dir);
        eb::io::write_file((dir / "fit.json").string(), dump(doc));
        eb::io::write_file((dir / "ksweep.csv").string(), sweep.to_csv());
    } else if (c.format == "json") {
        std::cout << dump(doc);
    } else {
        std::cout << sweep.to_csv();
    }
    return kExitOk;
}

// ---- latent ----------------------------------------------------------------

eb::LabelledMatrix observed_matrix(const Config& c, const eb::BlockGraph& g, std::shared_ptr<const eb::BlockGraph> gp,
                                   const eb::ObservationMask& mask) {
    if (!c.input.empty()) return eb::io::table_matrix(eb::io::parse_csv(eb::io::read_file(c.input)));
    if (!c.params.empty()) return eb::path_sum_matrix(need_params(c, std::move(gp))).restrict(mask.observed(g));
    throw CLI::RequiredError("--input or --params");
}

int cmd_recover(const Config& c) {
    const auto g = need_graph(c);
    if (c.latent.empty()) throw CLI::RequiredError("--latent");
    const auto mask = eb::io::read_mask(c.latent);
    const auto report = eb::check_identifiable(*g, mask);
    if (!report.identifiable) {
        json diag{{"identifiable", false}, {"error", "NotIdentifiable"}, {"offending", report.offending}};
        std::cout << dump(diag);
        return kExitValidation;
    }
    const auto p_obs = observed_matrix(c, *g, g, mask);
    const auto p = eb::recover_path_sums(*g, p_obs, mask, c.tol.value_or(eb::kRecoveryTolerance));
    const auto d = eb::recover_edge_params(p, g);
    if (c.format == "json") {
        json doc{{"ids", p.ids}, {"path_sums", matrix_json(p.values)}, {"params", eb::io::params_to_json(d)}};
        emit(dump(doc), out_file(c.out, "recovered.json"));
    } else if (c.out.empty()) {
        std::cout << eb::io::matrix_table(p).to_csv();
    } else {
        const std::filesystem::path dir(c.out);
        std::filesystem::create_directories(dir);
        eb::io::write_file((dir / "P.csv").string(), eb::io::matrix_table(p).to_csv());
        eb::io::write_file((dir / "params.json").string(), dump(eb::io::params_to_json(d)));
    }
    return kExitOk;
}

int cmd_check_identifiable(const Config& c) {
    const auto g = need_graph(c);
    if (c.latent.empty()) throw CLI::RequiredError("--latent");
    const auto report = eb::check_identifiable(*g, eb::io::read_mask(c.latent));
    if (c.format == "json") {
        std::cout << dump({{"identifiable", report.identifiable}, {"offending", report.offending}});
    } else {
        std::cout << "identifiable: " << (report.identifiable ? "yes" : "no") << "\n";
        for (const auto& id : report.offending) std::cout << "offending: " << id << "\n";
    }
    return report.identifiable ? kExitOk : kExitValidation;
}

unsigned default_threads() {
    if (const char* env = std::getenv("EXTREME_BLOCKS_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tail dependence of Markov fields on block graphs with Husler-Reiss cliques", "eblocks"};
    app.require_subcommand(1);
    Config c;
    c.threads = default_threads();

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--graph", c.graph, "graph JSON file");
        sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json", "binary"}));
        sub->add_option("--out", c.out, "output file, or directory for multi-file commands");
    };
    const auto model = [&](CLI::App* sub) {
        common(sub);
        sub->add_option("--params", c.params, "edge parameter JSON file");
    };
    const auto evaluation = [&](CLI::App* sub) {
        model(sub);
        sub->add_option("--subset", c.subset, "node identifiers (default: all)")->delimiter(',');
        sub->add_option("--tol", c.tol, "relative tolerance of the normal CDF quadrature");
        sub->add_option("--seed", c.seed, "quadrature or Monte-Carlo seed");
    };

    auto* validate = app.add_subcommand("validate", "check a graph and optional parameters");
    model(validate);

    auto* params = app.add_subcommand("params", "path sums, Gaussian limit and precision for an anchor");
    model(params);
    params->add_option("--anchor", c.anchor, "anchor node");
    params->add_option("--tol", c.tol, "tolerance for structural zeros of the precision");

    auto* simulate = app.add_subcommand("simulate", "draw the limiting field or the Pareto limit");
    model(simulate);
    simulate->add_option("--anchor", c.anchor, "anchor node");
    simulate->add_option("--n", c.n, "number of draws")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", c.seed, "random seed");
    simulate->add_option("--threads", c.threads, "worker threads (0: all cores)");
    simulate->add_option("--kind", c.kind, "field or pareto")->check(CLI::IsMember({"field", "pareto"}));

    auto* stdf = app.add_subcommand("stdf", "stable tail dependence function");
    evaluation(stdf);
    stdf->add_option("--weights", c.weights, "weights for the subset nodes (default: 1)")->delimiter(',');
    stdf->add_option("--method", c.method, "exact or mc")->check(CLI::IsMember({"exact", "mc"}));
    stdf->add_option("--anchor", c.anchor, "anchor for --method mc");
    stdf->add_option("--n", c.n, "draws for --method mc")->check(CLI::PositiveNumber);
    stdf->add_option("--threads", c.threads, "worker threads for --method mc");

    auto* pareto = app.add_subcommand("pareto-cdf", "multivariate Pareto CDF");
    evaluation(pareto);
    pareto->add_option("--point", c.point, "evaluation point on the subset")->delimiter(',')->required();

    auto* ec = app.add_subcommand("ec", "extremal coefficient of a node subset");
    evaluation(ec);

    auto* fit = app.add_subcommand("fit", "estimate edge parameters from a sample");
    common(fit);
    fit->add_option("--input", c.input, "sample CSV with a header of node identifiers");
    fit->add_option("--k", c.k, "number of exceedances per anchor (comma list for a sweep)")->delimiter(',');
    fit->add_option("--anchor", c.anchor, "single anchor (default: all nodes)");
    fit->add_option("--tol", c.tol, "KKT tolerance of the least-squares solver");
    fit->add_flag("--pareto-input", c.pareto_input, "sample is already on the Pareto scale");

    auto* recover = app.add_subcommand("recover", "recover path sums and parameters with latent nodes");
    model(recover);
    recover->add_option("--latent", c.latent, "latent mask JSON file");
    recover->add_option("--input", c.input, "observed path-sum matrix CSV");
    recover->add_option("--tol", c.tol, "consistency tolerance");

    auto* check = app.add_subcommand("check-identifiable", "identifiability of parameters with latent nodes");
    common(check);
    check->add_option("--latent", c.latent, "latent mask JSON file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "validate") return cmd_validate(c);
        if (name == "params") return cmd_params(c);
        if (name == "simulate") return cmd_simulate(c);
        if (name == "stdf") return cmd_stdf(c);
        if (name == "pareto-cdf") return cmd_pareto_cdf(c);
        if (name == "ec") return cmd_ec(c);
        if (name == "fit") return cmd_fit(c);
        if (name == "recover") return cmd_recover(c);
        if (name == "check-identifiable") return cmd_check_identifiable(c);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const eb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cout << json{{"error", eb::to_string(e.kind())}, {"message", e.what()}}.dump() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
