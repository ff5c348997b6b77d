#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "cointerest/corpus.hpp"
#include "cointerest/error.hpp"

namespace cointerest {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
std::optional<T> parse_int(std::string_view s) {
    T value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
    return value;
}

std::string describe(const GeoRange& r) {
    return "[" + std::to_string(r.start_ip) + "," + std::to_string(r.end_ip) + "," + r.country.str() + "]";
}

}  // namespace

std::optional<CountryCode> CountryCode::try_parse(std::string_view text) {
    if (text.size() != 2) return std::nullopt;
    CountryCode code;
    for (int i = 0; i < 2; ++i) {
        char c = text[i];
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
        if (c < 'A' || c > 'Z') return std::nullopt;
        code.chars_[i] = c;
    }
    return code;
}

CountryCode CountryCode::parse(std::string_view text) {
    if (auto code = try_parse(text)) return *code;
    throw ParseError("invalid country code '" + std::string(text) + "'", 0);
}

std::optional<Ipv4> parse_ipv4(std::string_view text) {
    Ipv4 ip = 0;
    for (int octet = 0; octet < 4; ++octet) {
        const auto dot = text.find('.');
        const bool last = octet == 3;
        if (last != (dot == std::string_view::npos)) return std::nullopt;
        const auto part = last ? text : text.substr(0, dot);
        if (part.empty() || part.size() > 3) return std::nullopt;
        auto value = parse_int<unsigned>(part);
        if (!value || *value > 255) return std::nullopt;
        ip = (ip << 8) | *value;
        if (!last) text.remove_prefix(dot + 1);
    }
    return ip;
}

std::string format_ipv4(Ipv4 ip) {
    return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 255) + "." +
           std::to_string((ip >> 8) & 255) + "." + std::to_string(ip & 255);
}

GeoTable::GeoTable(std::vector<GeoRange> ranges) : ranges_(std::move(ranges)) {
    for (const auto& r : ranges_) {
        if (r.start_ip > r.end_ip) throw ValidationError("inverted range " + describe(r));
    }
    std::sort(ranges_.begin(), ranges_.end(),
              [](const GeoRange& a, const GeoRange& b) { return a.start_ip < b.start_ip; });
    for (std::size_t i = 1; i < ranges_.size(); ++i) {
        if (ranges_[i].start_ip <= ranges_[i - 1].end_ip) {
            throw ValidationError("overlapping ranges " + describe(ranges_[i - 1]) + " and " +
                                  describe(ranges_[i]));
        }
    }
}

std::optional<CountryCode> GeoTable::resolve(Ipv4 ip) const {
    // first range starting after ip; its predecessor is the only candidate
    auto it = std::upper_bound(ranges_.begin(), ranges_.end(), ip,
                               [](Ipv4 value, const GeoRange& r) { return value < r.start_ip; });
    if (it == ranges_.begin()) return std::nullopt;
    --it;
    if (ip > it->end_ip) return std::nullopt;
    return it->country;
}

GeoTable parse_geo_table(std::istream& in) {
    std::vector<GeoRange> ranges;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto text = trim(line);
        if (text.empty()) continue;
        if (line_number == 1 && text.starts_with("start_ip")) continue;

        std::string_view fields[3];
        std::string_view rest = text;
        for (int f = 0; f < 3; ++f) {
            const auto comma = rest.find(',');
            if (f < 2 && comma == std::string_view::npos) {
                throw ParseError("expected 3 comma-separated fields", line_number);
            }
            fields[f] = trim(f < 2 ? rest.substr(0, comma) : rest);
            if (f < 2) rest.remove_prefix(comma + 1);
        }
        if (fields[2].find(',') != std::string_view::npos) {
            throw ParseError("expected 3 comma-separated fields", line_number);
        }
        auto start = parse_int<Ipv4>(fields[0]);
        auto end = parse_int<Ipv4>(fields[1]);
        if (!start) start = parse_ipv4(fields[0]);
        if (!end) end = parse_ipv4(fields[1]);
        if (!start || !end) throw ParseError("invalid IPv4 bound", line_number);
        auto country = CountryCode::try_parse(fields[2]);
        if (!country) throw ParseError("invalid country code '" + std::string(fields[2]) + "'", line_number);
        ranges.push_back({*start, *end, *country});
    }
    return GeoTable(std::move(ranges));
}

GeoTable load_geo_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open geolocation table " + path.string());
    return parse_geo_table(in);
}

}  // namespace cointerest
