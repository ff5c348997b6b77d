#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "artifacts.hpp"
#include "cointerest/error.hpp"
#include "cointerest/mapeq.hpp"
#include "cointerest/null_model.hpp"
#include "cointerest/pipeline.hpp"

namespace cointerest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

namespace files {
constexpr const char* corpus = "corpus.bin";
constexpr const char* ingest_report = "ingest_report.json";
constexpr const char* pair_z = "pair_z.csv";
constexpr const char* links = "links.csv";
constexpr const char* filter_stats = "filter_stats.json";
constexpr const char* clusters = "clusters.csv";
constexpr const char* cluster_meta = "cluster_meta.json";
constexpr const char* cluster_network = "cluster_network.json";
constexpr const char* edges = "edges.csv";
constexpr const char* regression_csv = "regression.csv";
constexpr const char* regression_md = "regression.md";
constexpr const char* regression_json = "regression.json";
constexpr const char* top_articles = "top_articles.csv";
constexpr const char* choropleth = "choropleth.geojson";
constexpr const char* report_json = "report.json";
constexpr const char* report_md = "report.md";
}  // namespace files

std::string num(double v) { return fmt::format("{}", v); }

void require(const fs::path& dir, const char* file, const char* stage, const char* producer) {
    if (!fs::exists(dir / file)) {
        throw PrerequisiteError(fmt::format("the {} stage needs {} in {}; run `cointerest {}` first", stage, file,
                                            dir.string(), producer));
    }
}

void require_input(const fs::path& path, const std::string& what) {
    if (path.empty()) throw UsageError(what + " is not configured");
    if (!fs::is_regular_file(path)) throw IoError(what + " not found: " + path.string());
}

/// All configured inputs a stage will read, checked before any work.
void validate_inputs(Stage stage, const PipelineConfig& config) {
    const bool all = stage == Stage::All;
    if (all || stage == Stage::Ingest) {
        require_input(config.edit_log, "edit log");
        if (!config.geo_table.empty()) require_input(config.geo_table, "geolocation table");
    }
    if (all || stage == Stage::Regress) {
        if (stage == Stage::Regress && config.covariates.empty()) {
            throw UsageError("the regress stage needs at least one covariate (covariate = name:path)");
        }
        for (const auto& [name, path] : config.covariates) require_input(path, "covariate '" + name + "'");
    }
    if ((all || stage == Stage::Export) && !config.geometry.empty()) require_input(config.geometry, "geometry file");
}

Corpus load_corpus(const fs::path& dir) {
    std::ifstream in(dir / files::corpus, std::ios::binary);
    if (!in) throw IoError("cannot open " + (dir / files::corpus).string());
    return read_corpus(in);
}

std::vector<Link> load_links(const fs::path& dir) {
    std::vector<Link> links;
    for (const auto& row : artifacts::read_csv(dir / files::links)) {
        if (row.size() != 4) throw ParseError("links.csv rows need 4 fields", 0);
        links.push_back({CountryCode::parse(row[0]), CountryCode::parse(row[1]), std::stod(row[2]), std::stod(row[3])});
    }
    return links;
}

CountryPartition load_partition(const fs::path& dir) {
    CountryPartition partition;
    for (const auto& row : artifacts::read_csv(dir / files::clusters)) {
        if (row.size() != 2) throw ParseError("clusters.csv rows need 2 fields", 0);
        partition[CountryCode::parse(row[0])] = static_cast<std::uint32_t>(std::stoul(row[1]));
    }
    return partition;
}

void stage_ingest(const PipelineConfig& config, StageOutcome& outcome) {
    const auto& dir = config.out_dir;
    const GeoTable geo = config.geo_table.empty() ? GeoTable{} : load_geo_table(config.geo_table);
    if (config.geo_table.empty()) outcome.notes.push_back("no geolocation table: raw IP origins stay unresolved");
    const auto result = ingest_file(config.edit_log, geo, config.shards);

    auto meta = artifacts::provenance(config);
    std::ostringstream bin;
    write_corpus(bin, result.corpus, meta.dump());
    artifacts::write_atomic(dir / files::corpus, bin.str());

    const auto& r = result.report;
    json report = {{"records_total", r.records_total}, {"resolved", r.resolved}, {"unresolved", r.unresolved},
                   {"dropped", r.dropped}, {"articles", r.articles}, {"countries", r.countries},
                   {"M", r.total_edits}, {"metadata", meta}};
    artifacts::write_atomic(dir / files::ingest_report, report.dump(2) + "\n");
    outcome.artifacts.push_back(dir / files::corpus);
    outcome.artifacts.push_back(dir / files::ingest_report);
    if (r.unresolved) outcome.warnings.push_back(fmt::format("{} records could not be geolocated", r.unresolved));
    if (r.dropped) outcome.warnings.push_back(fmt::format("{} malformed records were dropped", r.dropped));
}

void stage_filter(const PipelineConfig& config, StageOutcome& outcome) {
    const auto& dir = config.out_dir;
    require(dir, files::corpus, "filter", "ingest");
    const auto corpus = load_corpus(dir);
    const auto& act = corpus.activity;
    if (act.country_count() < 2) throw DomainError("the corpus has fewer than 2 countries; nothing to filter");

    const auto table = cumulative_z_grouped(corpus);
    const double t = significance_threshold(act.country_count(), act.article_count, config.alpha);
    const auto entries = table.entries();
    const auto links = filter_links(entries, t);

    std::string pair_csv = artifacts::csv_provenance(config) + "country_a,country_b,z_sum\n";
    for (const auto& e : entries) {
        pair_csv += act.countries[e.pair.first].str() + "," + act.countries[e.pair.second].str() + "," +
                    num(e.z_sum) + "\n";
    }
    std::string links_csv = artifacts::csv_provenance(config) + "country_a,country_b,z_sum,weight\n";
    for (const auto& l : links) {
        links_csv += act.countries[l.pair.first].str() + "," + act.countries[l.pair.second].str() + "," +
                     num(l.z_sum) + "," + num(l.weight) + "\n";
    }
    json stats = {{"N", act.country_count()},
                  {"L", act.article_count},
                  {"M", act.total_edits},
                  {"t", t},
                  {"threshold_constant", t / std::sqrt(static_cast<double>(act.article_count))},
                  {"alpha", config.alpha},
                  {"significant_pairs", links.size()},
                  {"tested_pairs", entries.size()},
                  {"metadata", artifacts::provenance(config)}};

    artifacts::write_atomic(dir / files::pair_z, pair_csv);
    artifacts::write_atomic(dir / files::links, links_csv);
    artifacts::write_atomic(dir / files::filter_stats, stats.dump(2) + "\n");
    for (auto f : {files::pair_z, files::links, files::filter_stats}) outcome.artifacts.push_back(dir / f);
}

void stage_cluster(const PipelineConfig& config, StageOutcome& outcome) {
    const auto& dir = config.out_dir;
    require(dir, files::links, "cluster", "filter");
    const auto links = load_links(dir);
    const InterestNetwork network(links);

    std::vector<mapeq::WeightedEdge> edges;
    for (const auto& e : network.edges()) edges.push_back({e.u, e.v, e.weight});
    const mapeq::FlowNetwork flow(network.node_count(), edges);
    const auto partition = mapeq::optimize(flow, {config.seed, config.trials});
    const std::vector<std::uint32_t> one_module(network.node_count(), 0);

    CountryPartition by_country;
    std::string clusters_csv = artifacts::csv_provenance(config) + "country,cluster_id\n";
    for (std::size_t i = 0; i < network.node_count(); ++i) {
        by_country[network.nodes()[i]] = partition.module_of[i];
        clusters_csv += network.nodes()[i].str() + "," + std::to_string(partition.module_of[i]) + "\n";
    }

    const auto clustered = aggregate_clusters(network, by_country);
    json nodes = json::array(), cluster_links = json::array();
    for (const auto& n : clustered.nodes) {
        json members = json::array();
        for (const auto& m : n.members) members.push_back(m.str());
        json strongest = json::array();
        for (const auto& l : strongest_intra_cluster_links(network, by_country, n.cluster, config.top_k)) {
            strongest.push_back({{"country_a", l.a.str()}, {"country_b", l.b.str()}, {"weight", l.weight},
                                 {"z_sum", l.z_sum}});
        }
        nodes.push_back({{"id", n.cluster}, {"size", n.size}, {"internal_weight", n.internal_weight},
                         {"members", members}, {"strongest_links", strongest}});
    }
    for (const auto& l : clustered.links) {
        cluster_links.push_back({{"source", l.a}, {"target", l.b}, {"weight", l.weight}});
    }
    json cluster_network = {{"nodes", nodes}, {"links", cluster_links}, {"metadata", artifacts::provenance(config)}};

    std::string edges_csv = artifacts::csv_provenance(config) + "country_a,country_b,weight,z_sum,cluster_a,cluster_b\n";
    for (const auto& e : network.edges()) {
        edges_csv += network.nodes()[e.u].str() + "," + network.nodes()[e.v].str() + "," + num(e.weight) + "," +
                     num(e.z_sum) + "," + std::to_string(partition.module_of[e.u]) + "," +
                     std::to_string(partition.module_of[e.v]) + "\n";
    }

    json meta = {{"codelength", partition.codelength},
                 {"one_level_codelength", mapeq::codelength(flow, one_module)},
                 {"trials", config.trials},
                 {"seed", config.seed},
                 {"num_clusters", partition.module_count()},
                 {"nodes", network.node_count()},
                 {"links", network.edges().size()},
                 {"warnings", flow.warnings()},
                 {"metadata", artifacts::provenance(config)}};

    artifacts::write_atomic(dir / files::clusters, clusters_csv);
    artifacts::write_atomic(dir / files::cluster_network, cluster_network.dump(2) + "\n");
    artifacts::write_atomic(dir / files::edges, edges_csv);
    artifacts::write_atomic(dir / files::cluster_meta, meta.dump(2) + "\n");
    for (auto f : {files::clusters, files::cluster_network, files::edges, files::cluster_meta}) {
        outcome.artifacts.push_back(dir / f);
    }
    if (network.node_count() == 0) outcome.warnings.push_back("no significant links; the network is empty");
}

void stage_regress(const PipelineConfig& config, StageOutcome& outcome) {
    const auto& dir = config.out_dir;
    require(dir, files::pair_z, "regress", "filter");
    require(dir, files::links, "regress", "filter");

    std::map<std::pair<CountryCode, CountryCode>, double> z_sums;
    std::set<CountryCode> codes;
    for (const auto& row : artifacts::read_csv(dir / files::pair_z)) {
        if (row.size() != 3) throw ParseError("pair_z.csv rows need 3 fields", 0);
        const auto a = CountryCode::parse(row[0]), b = CountryCode::parse(row[1]);
        z_sums[std::minmax(a, b)] = std::stod(row[2]);
        codes.insert(a);
        codes.insert(b);
    }
    std::set<std::pair<CountryCode, CountryCode>> significant;
    for (const auto& l : load_links(dir)) significant.insert(std::minmax(l.a, l.b));

    const std::vector<CountryCode> labels(codes.begin(), codes.end());
    mrqap::DyadicMatrix dep(labels);
    for (std::size_t a = 0; a < labels.size(); ++a) {
        for (std::size_t b = a + 1; b < labels.size(); ++b) {
            const auto key = std::minmax(labels[a], labels[b]);
            const auto it = z_sums.find(key);
            if (it == z_sums.end()) continue;
            dep.set(a, b, config.raw_dependent || significant.contains(key) ? it->second : 0.0);
        }
    }
    std::vector<mrqap::Covariate> covs;
    for (const auto& [name, path] : config.covariates) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open covariate file " + path.string());
        covs.push_back({name, mrqap::read_dyadic_csv(in, labels)});
    }
    const auto design = mrqap::vectorize_dyads(dep, covs);
    const auto models = mrqap::nested_models(design, config.permutations, config.scheme, config.seed);

    json jmodels = json::array();
    for (std::size_t m = 0; m < models.size(); ++m) {
        const auto& r = models[m];
        auto coef = [](const mrqap::Coefficient& c) {
            json j = {{"term", c.name}, {"estimate", c.estimate}, {"std_error", c.std_error}, {"t", c.t}};
            j["p_value"] = std::isnan(c.p_value) ? json(nullptr) : json(c.p_value);
            return j;
        };
        json coefs = json::array();
        for (const auto& c : r.coefficients) coefs.push_back(coef(c));
        jmodels.push_back({{"model", fmt::format("R{}", m)}, {"intercept", coef(r.intercept)},
                           {"coefficients", coefs}, {"r_squared", r.r_squared},
                           {"adj_r_squared", r.adj_r_squared}, {"f_statistic", r.f_statistic}, {"df", r.df},
                           {"dyads", r.dyads}, {"dropped", r.dropped}});
    }
    json reg = {{"models", jmodels},
                {"dependent", config.raw_dependent ? "raw" : "filtered"},
                {"scheme", mrqap::to_string(config.scheme)},
                {"permutations", config.permutations},
                {"metadata", artifacts::provenance(config)}};

    artifacts::write_atomic(dir / files::regression_csv,
                            artifacts::csv_provenance(config) + mrqap::format_table_csv(models));
    artifacts::write_atomic(dir / files::regression_md,
                            fmt::format("<!-- version={} seed={} config_hash={} -->\n", kVersion, config.seed,
                                        config.hash()) +
                                mrqap::format_table_markdown(models));
    artifacts::write_atomic(dir / files::regression_json, reg.dump(2) + "\n");
    for (auto f : {files::regression_csv, files::regression_md, files::regression_json}) {
        outcome.artifacts.push_back(dir / f);
    }
    if (design.dropped) outcome.notes.push_back(fmt::format("{} dyads dropped for missing values", design.dropped));
}

void stage_export(const PipelineConfig& config, StageOutcome& outcome) {
    const auto& dir = config.out_dir;
    require(dir, files::corpus, "export", "ingest");
    require(dir, files::links, "export", "filter");
    require(dir, files::clusters, "export", "cluster");
    const auto corpus = load_corpus(dir);
    const auto links = load_links(dir);
    const InterestNetwork network(links);
    const auto partition = load_partition(dir);

    std::string top_csv = artifacts::csv_provenance(config) + "country_a,country_b,rank,article_id,z\n";
    for (std::size_t i = 0; i < std::min(config.top_pairs, links.size()); ++i) {
        const auto ranking = rank_articles(corpus, network, links[i].a, links[i].b, config.top_k);
        if (ranking.warning) outcome.warnings.push_back(*ranking.warning);
        for (std::size_t r = 0; r < ranking.articles.size(); ++r) {
            top_csv += fmt::format("{},{},{},{},{}\n", links[i].a.str(), links[i].b.str(), r + 1,
                                   ranking.articles[r].article_id, ranking.articles[r].z);
        }
    }
    artifacts::write_atomic(dir / files::top_articles, top_csv);
    outcome.artifacts.push_back(dir / files::top_articles);

    if (config.geometry.empty()) {
        outcome.notes.push_back("no geometry file configured; choropleth export skipped");
        return;
    }
    const auto exported = export_geojson(partition, artifacts::read_json(config.geometry));
    auto collection = exported.collection;
    collection["metadata"] = artifacts::provenance(config);
    collection["metadata"]["warnings"] = exported.warnings;
    artifacts::write_atomic(dir / files::choropleth, collection.dump() + "\n");
    outcome.artifacts.push_back(dir / files::choropleth);
    for (const auto& w : exported.warnings) outcome.warnings.push_back(w);
}

void stage_report(const PipelineConfig& config, StageOutcome& outcome) {
    const auto& dir = config.out_dir;
    require(dir, files::ingest_report, "report", "ingest");
    require(dir, files::filter_stats, "report", "filter");
    require(dir, files::cluster_meta, "report", "cluster");
    auto report = build_report(dir);
    report["metadata"] = artifacts::provenance(config);
    artifacts::write_atomic(dir / files::report_json, report.dump(2) + "\n");
    artifacts::write_atomic(dir / files::report_md, report_markdown(report));
    outcome.artifacts.push_back(dir / files::report_json);
    outcome.artifacts.push_back(dir / files::report_md);
}

}  // namespace

Stage parse_stage(std::string_view name) {
    if (name == "ingest") return Stage::Ingest;
    if (name == "filter") return Stage::Filter;
    if (name == "cluster") return Stage::Cluster;
    if (name == "regress") return Stage::Regress;
    if (name == "export") return Stage::Export;
    if (name == "report") return Stage::Report;
    if (name == "all") return Stage::All;
    throw UsageError("unknown stage '" + std::string(name) + "'");
}

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::Ingest: return "ingest";
        case Stage::Filter: return "filter";
        case Stage::Cluster: return "cluster";
        case Stage::Regress: return "regress";
        case Stage::Export: return "export";
        case Stage::Report: return "report";
        case Stage::All: return "all";
    }
    return "?";
}

StageOutcome run_stage(Stage stage, const PipelineConfig& config) {
    validate_inputs(stage, config);
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + config.out_dir.string());
    artifacts::OutputLock lock(config.out_dir);

    StageOutcome outcome;
    switch (stage) {
        case Stage::Ingest: stage_ingest(config, outcome); break;
        case Stage::Filter: stage_filter(config, outcome); break;
        case Stage::Cluster: stage_cluster(config, outcome); break;
        case Stage::Regress: stage_regress(config, outcome); break;
        case Stage::Export: stage_export(config, outcome); break;
        case Stage::Report: stage_report(config, outcome); break;
        case Stage::All:
            stage_ingest(config, outcome);
            stage_filter(config, outcome);
            stage_cluster(config, outcome);
            if (config.covariates.empty()) {
                // a stale table from an earlier run must not leak into the report
                for (auto f : {files::regression_csv, files::regression_md, files::regression_json}) {
                    fs::remove(config.out_dir / f, ec);
                }
                outcome.notes.push_back("no covariates configured; regression stage skipped");
            } else {
                stage_regress(config, outcome);
            }
            stage_export(config, outcome);
            stage_report(config, outcome);
            break;
    }
    return outcome;
}

json build_report(const fs::path& dir) {
    const auto ingest = artifacts::read_json(dir / files::ingest_report);
    const auto filter = artifacts::read_json(dir / files::filter_stats);
    const auto cluster = artifacts::read_json(dir / files::cluster_meta);

    json top = json::array();
    const auto links = load_links(dir);
    for (std::size_t i = 0; i < std::min<std::size_t>(10, links.size()); ++i) {
        top.push_back({{"country_a", links[i].a.str()}, {"country_b", links[i].b.str()},
                       {"z_sum", links[i].z_sum}, {"weight", links[i].weight}});
    }
    json report = {{"N", filter["N"]},
                   {"L", filter["L"]},
                   {"M", filter["M"]},
                   {"t", filter["t"]},
                   {"alpha", filter["alpha"]},
                   {"links", filter["significant_pairs"]},
                   {"clusters", cluster["num_clusters"]},
                   {"codelength", cluster["codelength"]},
                   {"records", {{"total", ingest["records_total"]}, {"resolved", ingest["resolved"]},
                                {"unresolved", ingest["unresolved"]}, {"dropped", ingest["dropped"]}}},
                   {"top_pairs", top}};
    if (fs::exists(dir / files::regression_json)) {
        report["regression"] = artifacts::read_json(dir / files::regression_json)["models"];
        std::ifstream md(dir / files::regression_md);
        std::stringstream ss;
        ss << md.rdbuf();
        report["regression_table"] = ss.str();
    } else {
        report["regression"] = nullptr;
        report["regression_note"] = "regression stage was not run";
    }
    return report;
}

std::string report_markdown(const json& r) {
    std::string out = "# Interest network report\n\n";
    out += fmt::format("- Countries (N): {}\n- Articles (L): {}\n- Edits (M): {}\n", r["N"].get<std::uint64_t>(),
                       r["L"].get<std::uint64_t>(), r["M"].get<std::uint64_t>());
    out += fmt::format("- Threshold t: {:.4f} (alpha = {})\n", r["t"].get<double>(), r["alpha"].get<double>());
    out += fmt::format("- Significant links: {}\n- Clusters: {}\n- Codelength: {:.6f} bits\n\n",
                       r["links"].get<std::uint64_t>(), r["clusters"].get<std::uint64_t>(),
                       r["codelength"].get<double>());
    out += "## Strongest links\n\n| country_a | country_b | z_sum | weight |\n|---|---|---:|---:|\n";
    for (const auto& p : r["top_pairs"]) {
        out += fmt::format("| {} | {} | {:.3f} | {:.3f} |\n", p["country_a"].get<std::string>(),
                           p["country_b"].get<std::string>(), p["z_sum"].get<double>(), p["weight"].get<double>());
    }
    out += "\n## Regression\n\n";
    if (r.contains("regression_table")) {
        out += r["regression_table"].get<std::string>();
    } else {
        out += "_" + r.value("regression_note", std::string("not available")) + "._\n";
    }
    return out;
}

}  // namespace cointerest
