#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cointerest/mrqap.hpp"
#include "cointerest/network.hpp"

namespace cointerest {

inline constexpr const char* kVersion = "1.0.0";

struct PipelineConfig {
    std::filesystem::path edit_log;
    std::filesystem::path geo_table;  // optional when the log only carries cc: origins
    std::filesystem::path geometry;   // optional; export skips the map without it
    std::vector<std::pair<std::string, std::filesystem::path>> covariates;  // regression order
    std::filesystem::path out_dir = "out";

    double alpha = 0.05;
    unsigned trials = 10;
    std::uint64_t seed = 1;
    std::size_t permutations = 1000;
    mrqap::Scheme scheme = mrqap::Scheme::DoubleSemiPartialling;
    std::size_t top_k = 10;
    /// Number of strongest links whose top articles are exported.
    std::size_t top_pairs = 20;
    /// Use z_sum for every pair as the dependent variable instead of zero
    /// for non-significant pairs.
    bool raw_dependent = false;
    unsigned shards = 1;

    /// Sorted `key=value` lines of everything that affects results (the
    /// output directory and shard count are excluded).
    std::string canonical() const;
    /// 16 hex digits of FNV-1a over canonical().
    std::string hash() const;
};

/// Applies one `key=value` setting; relative paths resolve against `base`.
/// Throws UsageError for unknown keys or bad values.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value,
                   const std::filesystem::path& base = {});

/// Reads a flat `key = value` file (`#` comments). Repeated `covariate`
/// keys append `name:path` entries in order.
void load_config_file(PipelineConfig& config, const std::filesystem::path& path);

enum class Stage { Ingest, Filter, Cluster, Regress, Export, Report, All };
Stage parse_stage(std::string_view name);
std::string to_string(Stage stage);

struct StageOutcome {
    std::vector<std::filesystem::path> artifacts;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;
};

/// Runs one stage (or all) against `config.out_dir`. Input paths are
/// validated before any work; every artifact is written to a temporary
/// file and renamed into place; a lock file guards the output directory.
StageOutcome run_stage(Stage stage, const PipelineConfig& config);

struct GeoJsonExport {
    nlohmann::json collection;
    std::vector<std::string> warnings;
};

/// One feature per geometry country with properties {country, cluster_id};
/// cluster_id is null for countries outside the partition. Partition
/// countries without geometry are listed in warnings.
GeoJsonExport export_geojson(const CountryPartition& partition, const nlohmann::json& geometry);

/// Summary built from whatever artifacts exist in `out_dir`.
nlohmann::json build_report(const std::filesystem::path& out_dir);
std::string report_markdown(const nlohmann::json& report);

}  // namespace cointerest
