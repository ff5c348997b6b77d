#include <array>
#include <cstring>
#include <istream>
#include <ostream>

#include "cointerest/corpus.hpp"
#include "cointerest/error.hpp"

// Layout (little-endian):
//   magic "COINTCRP", u32 version,
//   u32 metadata length, metadata bytes,
//   u32 N, N x {2 code bytes, u64 total},
//   u64 L, L x {u32 id length, id bytes, u32 entries, entries x {u32 country, u64 count}}

namespace cointerest {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'O', 'I', 'N', 'T', 'C', 'R', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ParseError("truncated corpus file", 0);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(buf[i]) << (8 * i);
    return value;
}

std::string get_string(std::istream& in, std::uint32_t size) {
    std::string s(size, '\0');
    if (size && !in.read(s.data(), size)) throw ParseError("truncated corpus file", 0);
    return s;
}

}  // namespace

void write_corpus(std::ostream& out, const Corpus& corpus, std::string_view metadata) {
    const auto& act = corpus.activity;
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(metadata.size()));
    out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));

    put<std::uint32_t>(out, static_cast<std::uint32_t>(act.country_count()));
    for (std::size_t i = 0; i < act.country_count(); ++i) {
        out.write(act.countries[i].str().data(), 2);
        put<std::uint64_t>(out, act.totals[i]);
    }
    put<std::uint64_t>(out, corpus.articles.size());
    for (const auto& a : corpus.articles) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(a.article_id.size()));
        out.write(a.article_id.data(), static_cast<std::streamsize>(a.article_id.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(a.counts.size()));
        for (const auto& e : a.counts) {
            put<std::uint32_t>(out, e.country);
            put<std::uint64_t>(out, e.count);
        }
    }
    if (!out) throw IoError("failed to write corpus file");
}

Corpus read_corpus(std::istream& in, std::string* metadata) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw ParseError("not a corpus file (bad magic)", 0);
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) {
        throw ParseError("unsupported corpus file version " + std::to_string(version), 0);
    }
    auto meta = get_string(in, get<std::uint32_t>(in));
    if (metadata) *metadata = std::move(meta);

    std::map<std::string, std::map<CountryCode, std::uint64_t>> counts;
    const auto n = get<std::uint32_t>(in);
    std::vector<CountryCode> countries;
    std::vector<std::uint64_t> totals;
    for (std::uint32_t i = 0; i < n; ++i) {
        countries.push_back(CountryCode::parse(get_string(in, 2)));
        totals.push_back(get<std::uint64_t>(in));
    }
    const auto l = get<std::uint64_t>(in);
    for (std::uint64_t a = 0; a < l; ++a) {
        auto id = get_string(in, get<std::uint32_t>(in));
        auto& per_country = counts[id];
        const auto entries = get<std::uint32_t>(in);
        for (std::uint32_t e = 0; e < entries; ++e) {
            const auto c = get<std::uint32_t>(in);
            const auto k = get<std::uint64_t>(in);
            if (c >= n) throw ParseError("country index out of range in corpus file", 0);
            per_country[countries[c]] += k;
        }
    }

    Corpus corpus = make_corpus(counts);
    if (corpus.activity.countries != countries || corpus.activity.totals != totals ||
        corpus.articles.size() != l) {
        throw ValidationError("corpus file totals are inconsistent with its article profiles");
    }
    return corpus;
}

}  // namespace cointerest
