#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cointerest/error.hpp"
#include "cointerest/null_model.hpp"
#include "cointerest/rng.hpp"
#include "cointerest/synth.hpp"

namespace cointerest::synth {

namespace {

std::size_t pick(Rng& rng, std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return i;
    }
    return weights.size() - 1;
}

std::vector<double> zipf_shares(std::size_t n, double exponent) {
    std::vector<double> shares(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += shares[i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
    for (auto& s : shares) s /= total;
    return shares;
}

}  // namespace

std::vector<EditRecord> toy_edits() {
    const auto de = CountryCode::parse("DE"), at = CountryCode::parse("AT"), se = CountryCode::parse("SE"),
               no = CountryCode::parse("NO");
    const std::vector<std::pair<std::string, std::vector<CountryCode>>> sequences = {
        {"article_1", {de, at, de, at, se}},
        {"article_2", {se, no, no, se}},
        {"article_3", {de, at, at}},
        {"article_4", {no, se, de, no}},
    };
    std::vector<EditRecord> edits;
    std::int64_t ts = 1'400'000'000;
    for (const auto& [id, pins] : sequences) {
        for (const auto& c : pins) edits.push_back({id, ts += 60, c});
    }
    return edits;
}

std::vector<CountryCode> country_codes(std::size_t count) {
    if (count > 26 * 26) throw DomainError("at most 676 synthetic country codes");
    std::vector<CountryCode> codes;
    for (std::size_t i = 0; i < count; ++i) {
        const char s[2] = {static_cast<char>('A' + i / 26), static_cast<char>('A' + i % 26)};
        codes.push_back(CountryCode::parse(std::string_view(s, 2)));
    }
    return codes;
}

PlantedCorpus planted_corpus(const PlantedSpec& spec, std::uint64_t seed) {
    const auto n = spec.blocks * spec.countries_per_block;
    PlantedCorpus out;
    out.countries = country_codes(n);
    for (std::size_t i = 0; i < n; ++i) out.block_of.push_back(static_cast<std::uint32_t>(i / spec.countries_per_block));

    Rng rng(seed);
    // heterogeneous activity, shuffled so blocks mix large and small countries
    auto base = zipf_shares(n, 0.7);
    rng.shuffle(std::span<double>(base));

    std::vector<double> weights(n);
    for (std::size_t a = 0; a < spec.articles; ++a) {
        const bool local = rng.uniform() < spec.local_fraction;
        const auto home = static_cast<std::uint32_t>(rng.below(spec.blocks));
        for (std::size_t i = 0; i < n; ++i) {
            weights[i] = base[i] * (local && out.block_of[i] == home ? spec.intra_boost : 1.0);
        }
        const auto size = spec.min_edits + rng.below(spec.max_edits - spec.min_edits + 1);
        const auto id = fmt::format("planted_{:07}", a);
        for (std::uint64_t e = 0; e < size; ++e) {
            out.edits.push_back({id, static_cast<std::int64_t>(a * 1000 + e), out.countries[pick(rng, weights)]});
        }
    }
    return out;
}

Corpus null_corpus(std::size_t articles, std::size_t countries, std::uint64_t seed, std::uint64_t min_edits,
                   std::uint64_t max_edits) {
    CountryActivity act;
    act.countries = country_codes(countries);
    act.shares = zipf_shares(countries, 1.0);
    Rng rng(seed);
    std::vector<std::uint64_t> sizes(articles);
    for (auto& s : sizes) s = min_edits + rng.below(max_edits - min_edits + 1);
    const auto profiles = null_model_sample(act, sizes, substream_seed(seed, 1));
    return corpus_from_profiles(profiles, act.countries);
}

std::vector<mrqap::Covariate> covariates(std::span<const CountryCode> labels, std::span<const std::uint32_t> block_of,
                                         std::uint64_t seed) {
    const auto n = labels.size();
    Rng rng(seed);
    const std::vector<CountryCode> nodes(labels.begin(), labels.end());

    std::vector<std::uint32_t> language(n), religion(n);
    std::vector<double> x(n), y(n), gdp(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto block = i < block_of.size() ? block_of[i] : 0u;
        // mostly the block's language, sometimes a random one
        language[i] = rng.uniform() < 0.8 ? block : static_cast<std::uint32_t>(100 + rng.below(4));
        religion[i] = static_cast<std::uint32_t>(rng.below(3));
        x[i] = static_cast<double>(block) * 3.0 + rng.uniform();
        y[i] = rng.uniform() * 3.0;
        gdp[i] = rng.normal();
    }

    mrqap::DyadicMatrix lang(nodes), rel(nodes), dist(nodes), colonial(nodes), trade(nodes);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            lang.set(a, b, language[a] == language[b] ? 1.0 : 0.0);
            rel.set(a, b, religion[a] == religion[b] ? 1.0 : 0.0);
            const double d = std::hypot(x[a] - x[b], y[a] - y[b]) + 0.05;
            dist.set(a, b, std::log(d));
            colonial.set(a, b, rng.uniform() < 0.08 ? 1.0 : 0.0);
            trade.set(a, b, gdp[a] + gdp[b] - 0.5 * std::log(d) + 0.5 * rng.normal());
        }
    }
    return {{"shared_language", std::move(lang)},
            {"shared_religion", std::move(rel)},
            {"log_distance", std::move(dist)},
            {"colonial_tie", std::move(colonial)},
            {"log_trade", std::move(trade)}};
}

mrqap::DyadicMatrix linear_dependent(std::span<const mrqap::Covariate> covs, double intercept,
                                     std::span<const double> coefficients, double noise_sd, std::uint64_t seed) {
    if (covs.empty() || coefficients.size() != covs.size()) {
        throw DomainError("one coefficient per covariate is required");
    }
    const auto labels = covs.front().matrix.labels();
    mrqap::DyadicMatrix out(std::vector<CountryCode>(labels.begin(), labels.end()));
    Rng rng(seed);
    for (std::size_t a = 0; a < out.size(); ++a) {
        for (std::size_t b = a + 1; b < out.size(); ++b) {
            double v = intercept;
            for (std::size_t k = 0; k < covs.size(); ++k) v += coefficients[k] * covs[k].matrix.at(a, b);
            out.set(a, b, v + noise_sd * rng.normal());
        }
    }
    return out;
}

mrqap::DyadicMatrix random_dyadic(std::span<const CountryCode> labels, std::uint64_t seed) {
    mrqap::DyadicMatrix out(std::vector<CountryCode>(labels.begin(), labels.end()));
    Rng rng(seed);
    for (std::size_t a = 0; a < out.size(); ++a) {
        for (std::size_t b = a + 1; b < out.size(); ++b) out.set(a, b, rng.normal());
    }
    return out;
}

void write_edit_log(std::ostream& out, std::span<const EditRecord> edits) {
    for (const auto& e : edits) {
        out << e.article_id << '\t' << e.timestamp << '\t';
        if (const auto* ip = std::get_if<Ipv4>(&e.origin)) {
            out << format_ipv4(*ip);
        } else if (const auto* code = std::get_if<CountryCode>(&e.origin)) {
            out << "cc:" << code->str();
        } else {
            out << "::1";
        }
        out << '\n';
    }
}

void write_dyadic_csv(std::ostream& out, const mrqap::DyadicMatrix& matrix) {
    out << "country_a,country_b,value\n";
    const auto labels = matrix.labels();
    for (std::size_t a = 0; a < matrix.size(); ++a) {
        for (std::size_t b = a + 1; b < matrix.size(); ++b) {
            if (!matrix.defined(a, b)) continue;
            out << labels[a].str() << ',' << labels[b].str() << ',' << fmt::format("{}", matrix.at(a, b)) << '\n';
        }
    }
}

void write_square_geometry(std::ostream& out, std::span<const CountryCode> countries) {
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < countries.size(); ++i) {
        const double x = static_cast<double>(i % 10) * 2.0, y = static_cast<double>(i / 10) * 2.0;
        features.push_back({{"type", "Feature"},
                            {"properties", {{"iso_a2", countries[i].str()}}},
                            {"geometry",
                             {{"type", "Polygon"},
                              {"coordinates", {{{x, y}, {x + 1, y}, {x + 1, y + 1}, {x, y + 1}, {x, y}}}}}}});
    }
    out << nlohmann::json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) << '\n';
}

}  // namespace cointerest::synth
