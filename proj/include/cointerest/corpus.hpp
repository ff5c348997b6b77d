#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cointerest {

/// ISO-3166 alpha-2 code, stored as its two upper-case letters.
class CountryCode {
public:
    CountryCode() = default;

    /// Throws ParseError unless `text` is exactly two ASCII letters.
    /// Lower-case input is upper-cased.
    static CountryCode parse(std::string_view text);
    static std::optional<CountryCode> try_parse(std::string_view text);

    std::string str() const { return {chars_[0], chars_[1]}; }
    auto operator<=>(const CountryCode&) const = default;

private:
    char chars_[2] = {'?', '?'};
};

using Ipv4 = std::uint32_t;

/// Parses a dotted-quad address; nullopt for anything else.
std::optional<Ipv4> parse_ipv4(std::string_view text);
std::string format_ipv4(Ipv4 ip);

struct EditRecord {
    std::string article_id;
    std::int64_t timestamp = 0;
    /// Either a raw IPv4 address or an already resolved country. Origins that
    /// cannot be represented (IPv6) are carried as `Unresolvable`.
    struct Unresolvable {
        bool operator==(const Unresolvable&) const = default;
    };
    std::variant<Ipv4, CountryCode, Unresolvable> origin;
};

/// Parses one `article_id<TAB>timestamp<TAB>origin` line. Origin is either a
/// dotted quad or `cc:XX`; any other address form (IPv6) parses as
/// Unresolvable. Throws ParseError on structural problems.
EditRecord parse_edit_line(std::string_view line, std::size_t line_number = 0);

struct GeoRange {
    Ipv4 start_ip = 0;
    Ipv4 end_ip = 0;
    CountryCode country;
};

/// Sorted, pairwise disjoint IPv4 ranges with inclusive bounds.
class GeoTable {
public:
    GeoTable() = default;

    /// Sorts and validates. Throws ValidationError for inverted or
    /// overlapping ranges.
    explicit GeoTable(std::vector<GeoRange> ranges);

    std::optional<CountryCode> resolve(Ipv4 ip) const;
    std::span<const GeoRange> ranges() const { return ranges_; }
    bool empty() const { return ranges_.empty(); }

private:
    std::vector<GeoRange> ranges_;
};

/// Reads `start_ip,end_ip,country` rows. A leading `start_ip,...` header line
/// and blank lines are skipped.
GeoTable load_geo_table(const std::filesystem::path& path);
GeoTable parse_geo_table(std::istream& in);

/// Country of the unique range containing `ip`, or nullopt (unresolved).
inline std::optional<CountryCode> resolve_country(Ipv4 ip, const GeoTable& table) {
    return table.resolve(ip);
}

using CountryIndex = std::uint32_t;

/// Sparse per-article edit counts. Entries are sorted by country index and
/// every count is at least 1.
struct ArticleEditProfile {
    struct Entry {
        CountryIndex country;
        std::uint64_t count;
        bool operator==(const Entry&) const = default;
    };
    std::string article_id;
    std::vector<Entry> counts;
    std::uint64_t total = 0;

    /// k_i for this article (0 when absent).
    std::uint64_t count_of(CountryIndex country) const;
    bool operator==(const ArticleEditProfile&) const = default;
};

/// Global per-country activity. Countries are indexed in ascending code
/// order and only countries with at least one edit are present.
struct CountryActivity {
    std::vector<CountryCode> countries;
    std::vector<std::uint64_t> totals;
    std::vector<double> shares;
    std::uint64_t total_edits = 0;    // M
    std::uint64_t article_count = 0;  // L

    std::size_t country_count() const { return countries.size(); }  // N
    std::optional<CountryIndex> index_of(CountryCode code) const;
    /// Throws LookupError for unknown countries.
    CountryIndex require_index(CountryCode code) const;
    bool operator==(const CountryActivity&) const = default;
};

/// Profiles sorted by article_id plus the activity table derived from them.
struct Corpus {
    std::vector<ArticleEditProfile> articles;
    CountryActivity activity;
    bool operator==(const Corpus&) const = default;
};

/// Builds a corpus from already aggregated per-article country counts.
/// Zero counts are dropped, articles without edits are skipped.
Corpus make_corpus(const std::map<std::string, std::map<CountryCode, std::uint64_t>>& counts);

struct IngestReport {
    std::uint64_t records_total = 0;
    std::uint64_t resolved = 0;
    std::uint64_t unresolved = 0;
    /// Lines that failed to parse.
    std::uint64_t dropped = 0;
    std::uint64_t articles = 0;
    std::uint64_t countries = 0;
    std::uint64_t total_edits = 0;
};

struct IngestResult {
    Corpus corpus;
    IngestReport report;
};

/// Aggregates records into a corpus. Records are sharded by article id into
/// `shards` independent aggregates that are summed at the end; the result
/// does not depend on `shards` or on record order. Throws EmptyCorpusError
/// when no record resolves.
IngestResult ingest(std::span<const EditRecord> edits, const GeoTable& geo, unsigned shards = 1);

/// Streams an edit-log TSV. Malformed lines are counted as dropped.
IngestResult ingest_stream(std::istream& in, const GeoTable& geo, unsigned shards = 1);
IngestResult ingest_file(const std::filesystem::path& path, const GeoTable& geo, unsigned shards = 1);

/// Versioned binary corpus file. `metadata` is an opaque string stored in
/// the header (the pipeline puts its provenance JSON there).
void write_corpus(std::ostream& out, const Corpus& corpus, std::string_view metadata);
Corpus read_corpus(std::istream& in, std::string* metadata = nullptr);

}  // namespace cointerest
