#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <thread>
#include <unordered_map>

#include "cointerest/corpus.hpp"
#include "cointerest/error.hpp"

namespace cointerest {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

using CountryCounts = std::map<CountryCode, std::uint64_t>;

/// Per-shard partial aggregates. Shards own disjoint article ids, so the
/// final merge is a plain union.
class ShardedAggregator {
public:
    explicit ShardedAggregator(unsigned shards) : shards_(std::max(1u, shards)) {}

    void add_batch(std::span<const EditRecord> batch, const GeoTable& geo, IngestReport& report) {
        report.records_total += batch.size();
        const auto shard_count = shards_.size();

        std::vector<std::uint64_t> resolved(shard_count, 0);
        std::vector<std::uint64_t> unresolved(shard_count, 0);
        auto work = [&](std::size_t shard) {
            auto& table = shards_[shard];
            for (const auto& rec : batch) {
                if (shard_count > 1 && fnv1a(rec.article_id) % shard_count != shard) continue;
                std::optional<CountryCode> country;
                if (const auto* ip = std::get_if<Ipv4>(&rec.origin)) {
                    country = geo.resolve(*ip);
                } else if (const auto* code = std::get_if<CountryCode>(&rec.origin)) {
                    country = *code;
                }
                if (!country) {
                    ++unresolved[shard];
                    continue;
                }
                ++resolved[shard];
                ++table[rec.article_id][*country];
            }
        };

        if (shard_count == 1) {
            work(0);
        } else {
            std::vector<std::jthread> threads;
            threads.reserve(shard_count);
            for (std::size_t s = 0; s < shard_count; ++s) threads.emplace_back(work, s);
        }
        for (std::size_t s = 0; s < shard_count; ++s) {
            report.resolved += resolved[s];
            report.unresolved += unresolved[s];
        }
    }

    std::map<std::string, CountryCounts> merge() && {
        std::map<std::string, CountryCounts> merged;
        for (auto& shard : shards_) {
            for (auto& [article, counts] : shard) {
                auto& target = merged[article];
                for (const auto& [country, count] : counts) target[country] += count;
            }
            shard.clear();
        }
        return merged;
    }

private:
    std::vector<std::unordered_map<std::string, CountryCounts>> shards_;
};

IngestResult finish(ShardedAggregator&& agg, IngestReport report) {
    if (report.resolved == 0) {
        throw EmptyCorpusError("no edit record could be resolved to a country (" +
                               std::to_string(report.records_total) + " records read)");
    }
    IngestResult result;
    result.corpus = make_corpus(std::move(agg).merge());
    report.articles = result.corpus.activity.article_count;
    report.countries = result.corpus.activity.country_count();
    report.total_edits = result.corpus.activity.total_edits;
    result.report = report;
    return result;
}

}  // namespace

std::uint64_t ArticleEditProfile::count_of(CountryIndex country) const {
    auto it = std::lower_bound(counts.begin(), counts.end(), country,
                               [](const Entry& e, CountryIndex c) { return e.country < c; });
    return (it != counts.end() && it->country == country) ? it->count : 0;
}

std::optional<CountryIndex> CountryActivity::index_of(CountryCode code) const {
    auto it = std::lower_bound(countries.begin(), countries.end(), code);
    if (it == countries.end() || *it != code) return std::nullopt;
    return static_cast<CountryIndex>(it - countries.begin());
}

CountryIndex CountryActivity::require_index(CountryCode code) const {
    if (auto idx = index_of(code)) return *idx;
    throw LookupError("unknown country " + code.str());
}

EditRecord parse_edit_line(std::string_view line, std::size_t line_number) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string_view::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string_view::npos || line.find('\t', tab2 + 1) != std::string_view::npos) {
        throw ParseError("expected 3 tab-separated fields", line_number);
    }
    EditRecord rec;
    rec.article_id = std::string(line.substr(0, tab1));
    if (rec.article_id.empty()) throw ParseError("empty article id", line_number);

    const auto ts = line.substr(tab1 + 1, tab2 - tab1 - 1);
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), rec.timestamp);
    if (ts.empty() || ec != std::errc{} || ptr != ts.data() + ts.size()) {
        throw ParseError("invalid timestamp '" + std::string(ts) + "'", line_number);
    }

    const auto origin = line.substr(tab2 + 1);
    if (origin.starts_with("cc:")) {
        auto code = CountryCode::try_parse(origin.substr(3));
        if (!code) throw ParseError("invalid country code '" + std::string(origin) + "'", line_number);
        rec.origin = *code;
    } else if (auto ip = parse_ipv4(origin)) {
        rec.origin = *ip;
    } else if (origin.find(':') != std::string_view::npos) {
        rec.origin = EditRecord::Unresolvable{};  // IPv6
    } else {
        throw ParseError("invalid origin '" + std::string(origin) + "'", line_number);
    }
    return rec;
}

Corpus make_corpus(const std::map<std::string, std::map<CountryCode, std::uint64_t>>& counts) {
    Corpus corpus;
    auto& act = corpus.activity;

    std::map<CountryCode, std::uint64_t> totals;
    for (const auto& [article, per_country] : counts) {
        for (const auto& [country, count] : per_country) {
            if (count > 0) totals[country] += count;
        }
    }
    for (const auto& [country, total] : totals) {
        act.countries.push_back(country);
        act.totals.push_back(total);
        act.total_edits += total;
    }
    act.shares.reserve(act.totals.size());
    for (auto total : act.totals) {
        act.shares.push_back(static_cast<double>(total) / static_cast<double>(act.total_edits));
    }

    for (const auto& [article, per_country] : counts) {
        ArticleEditProfile profile;
        profile.article_id = article;
        for (const auto& [country, count] : per_country) {
            if (count == 0) continue;
            // std::map iteration is ascending by code, matching index order
            profile.counts.push_back({*act.index_of(country), count});
            profile.total += count;
        }
        if (profile.total > 0) corpus.articles.push_back(std::move(profile));
    }
    act.article_count = corpus.articles.size();
    return corpus;
}

IngestResult ingest(std::span<const EditRecord> edits, const GeoTable& geo, unsigned shards) {
    ShardedAggregator agg(shards);
    IngestReport report;
    agg.add_batch(edits, geo, report);
    return finish(std::move(agg), report);
}

IngestResult ingest_stream(std::istream& in, const GeoTable& geo, unsigned shards) {
    constexpr std::size_t batch_size = 1 << 16;
    ShardedAggregator agg(shards);
    IngestReport report;
    std::vector<EditRecord> batch;
    batch.reserve(batch_size);

    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line == "\r") continue;
        try {
            batch.push_back(parse_edit_line(line, line_number));
        } catch (const ParseError&) {
            ++report.records_total;
            ++report.dropped;
            continue;
        }
        if (batch.size() == batch_size) {
            agg.add_batch(batch, geo, report);
            batch.clear();
        }
    }
    if (in.bad()) throw IoError("error while reading edit log");
    agg.add_batch(batch, geo, report);
    return finish(std::move(agg), report);
}

IngestResult ingest_file(const std::filesystem::path& path, const GeoTable& geo, unsigned shards) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open edit log " + path.string());
    return ingest_stream(in, geo, shards);
}

}  // namespace cointerest
