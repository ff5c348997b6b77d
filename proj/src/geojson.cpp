#include <set>

#include "cointerest/error.hpp"
#include "cointerest/pipeline.hpp"

namespace cointerest {

namespace {

std::optional<CountryCode> feature_country(const nlohmann::json& feature) {
    if (const auto props = feature.find("properties"); props != feature.end() && props->is_object()) {
        for (const char* key : {"iso_a2", "ISO_A2", "iso2", "country"}) {
            if (const auto v = props->find(key); v != props->end() && v->is_string()) {
                if (auto code = CountryCode::try_parse(v->get<std::string>())) return code;
            }
        }
    }
    if (const auto id = feature.find("id"); id != feature.end() && id->is_string()) {
        return CountryCode::try_parse(id->get<std::string>());
    }
    return std::nullopt;
}

}  // namespace

GeoJsonExport export_geojson(const CountryPartition& partition, const nlohmann::json& geometry) {
    if (!geometry.is_object() || geometry.value("type", "") != "FeatureCollection" ||
        !geometry.contains("features") || !geometry["features"].is_array()) {
        throw ParseError("geometry must be a GeoJSON FeatureCollection", 0);
    }
    GeoJsonExport out;
    nlohmann::json features = nlohmann::json::array();
    std::set<CountryCode> with_geometry;
    for (const auto& feature : geometry["features"]) {
        const auto code = feature_country(feature);
        if (!code) continue;
        with_geometry.insert(*code);
        nlohmann::json f = {{"type", "Feature"}, {"geometry", feature.value("geometry", nlohmann::json())}};
        f["properties"]["country"] = code->str();
        if (auto it = partition.find(*code); it != partition.end()) {
            f["properties"]["cluster_id"] = it->second;
        } else {
            f["properties"]["cluster_id"] = nullptr;
        }
        features.push_back(std::move(f));
    }
    for (const auto& [code, cluster] : partition) {
        if (!with_geometry.contains(code)) out.warnings.push_back("no geometry for " + code.str());
    }
    out.collection = {{"type", "FeatureCollection"}, {"features", std::move(features)}};
    return out;
}

}  // namespace cointerest
