// Command-line driver for the interest-network pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cointerest/error.hpp"
#include "cointerest/pipeline.hpp"
#include "cointerest/synth.hpp"

namespace fs = std::filesystem;
using namespace cointerest;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Overrides {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> settings;
};

void add_pipeline_flags(CLI::App& cmd, Overrides& o) {
    cmd.add_option("--config", o.config_file, "key = value configuration file");
    auto setting = [&cmd, &o](const std::string& flag, const std::string& key, const std::string& help) {
        cmd.add_option_function<std::vector<std::string>>(
            flag,
            [&o, key](const std::vector<std::string>& values) {
                for (const auto& v : values) o.settings.emplace_back(key, v);
            },
            help);
    };
    setting("--alpha", "alpha", "significance level before the Bonferroni correction (default 0.05)");
    setting("--seed", "seed", "seed for clustering and permutation tests (default 1)");
    setting("--trials", "trials", "map-equation search restarts (default 10)");
    setting("--permutations", "permutations", "MRQAP permutations (default 1000)");
    setting("--scheme", "scheme", "MRQAP scheme: dsp or y-permute (default dsp)");
    setting("--top-k", "top_k", "articles per pair / links per cluster (default 10)");
    setting("--out", "out", "output directory (default ./out)");
    setting("--edit-log", "edit_log", "edit-log TSV");
    setting("--geo", "geo_table", "geolocation CSV");
    setting("--geometry", "geometry", "GeoJSON country geometry");
    setting("--covariate", "covariate", "name:path covariate CSV, repeatable, in model order");
    setting("--dependent", "dependent", "regression dependent: filtered (default) or raw");
    setting("--top-pairs", "top_pairs", "links whose top articles are exported (default 20)");
    setting("--shards", "shards", "ingest shards (default 1)");
}

PipelineConfig resolve_config(const Overrides& o) {
    PipelineConfig config;
    if (!o.config_file.empty()) load_config_file(config, o.config_file);
    // flags override the file
    bool covariates_reset = false;
    for (const auto& [key, value] : o.settings) {
        if (key == "covariate" && !covariates_reset) {
            config.covariates.clear();
            covariates_reset = true;
        }
        apply_setting(config, key, value, fs::current_path());
    }
    return config;
}

int run(Stage stage, const Overrides& o) {
    const auto config = resolve_config(o);
    const auto outcome = run_stage(stage, config);
    for (const auto& note : outcome.notes) std::cerr << "note: " << note << '\n';
    for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& a : outcome.artifacts) std::cout << a.string() << '\n';
    return kOk;
}

int synth_fixture(const fs::path& dir, const std::string& kind, std::uint64_t seed) {
    fs::create_directories(dir);
    std::vector<CountryCode> countries;
    std::vector<std::uint32_t> blocks;
    {
        std::ofstream log(dir / "edits.tsv");
        if (kind == "toy") {
            const auto edits = synth::toy_edits();
            synth::write_edit_log(log, edits);
            for (const char* c : {"AT", "DE", "NO", "SE"}) countries.push_back(CountryCode::parse(c));
            blocks = {0, 0, 1, 1};
        } else if (kind == "planted") {
            const auto planted = synth::planted_corpus({}, seed);
            synth::write_edit_log(log, planted.edits);
            countries = planted.countries;
            blocks = planted.block_of;
        } else {
            throw UsageError("unknown fixture kind '" + kind + "' (expected toy or planted)");
        }
    }
    {
        std::ofstream geom(dir / "geometry.geojson");
        synth::write_square_geometry(geom, countries);
    }
    std::ofstream cfg(dir / "pipeline.conf");
    cfg << "# generated by `cointerest synth " << kind << "`\n"
        << "edit_log = edits.tsv\ngeometry = geometry.geojson\nout = out\nseed = " << seed << "\n";
    if (countries.size() >= 8) {
        fs::create_directories(dir / "covariates");
        for (const auto& cov : synth::covariates(countries, blocks, seed + 1)) {
            std::ofstream out(dir / "covariates" / (cov.name + ".csv"));
            synth::write_dyadic_csv(out, cov.matrix);
            cfg << "covariate = " << cov.name << ":covariates/" << cov.name << ".csv\n";
        }
        cfg << "permutations = 199\n";
    }
    std::cout << (dir / "pipeline.conf").string() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Statistically validated country interest networks from co-editing logs"};
    app.require_subcommand(1);

    Overrides overrides;
    std::vector<std::pair<std::string, Stage>> stages = {
        {"ingest", Stage::Ingest},   {"filter", Stage::Filter}, {"cluster", Stage::Cluster},
        {"regress", Stage::Regress}, {"export", Stage::Export}, {"report", Stage::Report},
        {"all", Stage::All}};
    const char* help[] = {"aggregate the edit log into per-article country profiles",
                          "compute cumulative z-scores and keep significant links",
                          "cluster the interest network with the map equation",
                          "MRQAP regression of z-scores on dyadic covariates",
                          "write top articles per pair and the choropleth GeoJSON",
                          "summarize all artifacts",
                          "run every stage in order"};
    Stage chosen = Stage::All;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        auto* cmd = app.add_subcommand(stages[i].first, help[i]);
        add_pipeline_flags(*cmd, overrides);
        cmd->callback([&chosen, s = stages[i].second] { chosen = s; });
    }

    std::string fixture_kind = "toy";
    std::string fixture_dir = "fixture";
    std::uint64_t fixture_seed = 1;
    auto* synth_cmd = app.add_subcommand("synth", "write a bundled fixture (toy or planted) with its config");
    synth_cmd->add_option("kind", fixture_kind, "toy or planted")->capture_default_str();
    synth_cmd->add_option("--dir", fixture_dir, "target directory")->capture_default_str();
    synth_cmd->add_option("--seed", fixture_seed, "generator seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (synth_cmd->parsed()) return synth_fixture(fixture_dir, fixture_kind, fixture_seed);
        return run(chosen, overrides);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}
