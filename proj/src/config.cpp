#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "cointerest/error.hpp"
#include "cointerest/pipeline.hpp"

namespace cointerest {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size()) {
        throw UsageError("invalid value '" + value + "' for " + key);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("invalid value '" + value + "' for " + key);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.lexically_normal();
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void apply_setting(PipelineConfig& config, const std::string& raw_key, const std::string& raw_value,
                   const std::filesystem::path& base) {
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value = trim(raw_value);

    if (key == "edit_log") {
        config.edit_log = resolve(base, value);
    } else if (key == "geo_table") {
        config.geo_table = value.empty() ? std::filesystem::path{} : resolve(base, value);
    } else if (key == "geometry") {
        config.geometry = value.empty() ? std::filesystem::path{} : resolve(base, value);
    } else if (key == "covariate") {
        const auto colon = value.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == value.size()) {
            throw UsageError("covariate must be given as name:path, got '" + value + "'");
        }
        const auto name = trim(value.substr(0, colon));
        for (const auto& [existing, path] : config.covariates) {
            if (existing == name) throw UsageError("duplicate covariate '" + name + "'");
        }
        config.covariates.emplace_back(name, resolve(base, trim(value.substr(colon + 1))));
    } else if (key == "out") {
        config.out_dir = resolve(base, value);
    } else if (key == "alpha") {
        config.alpha = parse_double(key, value);
        if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
    } else if (key == "trials") {
        config.trials = parse_number<unsigned>(key, value);
        if (config.trials == 0) throw UsageError("trials must be at least 1");
    } else if (key == "seed") {
        config.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "permutations") {
        config.permutations = parse_number<std::size_t>(key, value);
        if (config.permutations < 99) throw UsageError("permutations must be at least 99");
    } else if (key == "scheme") {
        config.scheme = mrqap::parse_scheme(value);
    } else if (key == "top_k") {
        config.top_k = parse_number<std::size_t>(key, value);
    } else if (key == "top_pairs") {
        config.top_pairs = parse_number<std::size_t>(key, value);
    } else if (key == "dependent") {
        if (value == "filtered") {
            config.raw_dependent = false;
        } else if (value == "raw") {
            config.raw_dependent = true;
        } else {
            throw UsageError("dependent must be 'filtered' or 'raw'");
        }
    } else if (key == "shards") {
        config.shards = parse_number<unsigned>(key, value);
        if (config.shards == 0) throw UsageError("shards must be at least 1");
    } else {
        throw UsageError("unknown configuration key '" + raw_key + "'");
    }
}

void load_config_file(PipelineConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    const auto base = path.parent_path();
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(fmt::format("{}:{}: expected key = value", path.string(), line_number));
        }
        apply_setting(config, line.substr(0, eq), line.substr(eq + 1), base);
    }
}

std::string PipelineConfig::canonical() const {
    std::map<std::string, std::string> kv;
    kv["edit_log"] = edit_log.generic_string();
    kv["geo_table"] = geo_table.generic_string();
    kv["geometry"] = geometry.generic_string();
    std::string covs;
    for (const auto& [name, path] : covariates) covs += (covs.empty() ? "" : ";") + name + ":" + path.generic_string();
    kv["covariates"] = covs;
    kv["alpha"] = fmt::format("{}", alpha);
    kv["trials"] = std::to_string(trials);
    kv["seed"] = std::to_string(seed);
    kv["permutations"] = std::to_string(permutations);
    kv["scheme"] = mrqap::to_string(scheme);
    kv["top_k"] = std::to_string(top_k);
    kv["top_pairs"] = std::to_string(top_pairs);
    kv["dependent"] = raw_dependent ? "raw" : "filtered";
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string PipelineConfig::hash() const { return fmt::format("{:016x}", fnv1a(canonical())); }

}  // namespace cointerest
