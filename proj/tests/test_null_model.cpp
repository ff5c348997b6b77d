#include <doctest.h>

#include <cmath>

#include "cointerest/error.hpp"
#include "cointerest/null_model.hpp"
#include "cointerest/synth.hpp"
#include "oracles.hpp"

using namespace cointerest;

namespace {

CountryCode cc(const char* s) { return CountryCode::parse(s); }

Corpus corpus_of(const std::map<std::string, std::map<CountryCode, std::uint64_t>>& counts) {
    return make_corpus(counts);
}

}  // namespace

TEST_CASE("empirical_weight") {
    static_assert(empirical_weight(2, 3) == 6);
    CHECK(empirical_weight(0, 5) == 0);
    CHECK(empirical_weight(1, 1) == 1);
}

TEST_CASE("pair_moments examples against enumeration") {
    const double two[] = {0.5, 0.5};
    const auto e2 = oracle::enumerate_pair_moments(2, two, 0, 1);
    const auto m2 = pair_moments(2, 0.5, 0.5);
    CHECK(m2.mean == doctest::Approx(e2.mean));
    CHECK(m2.sigma == doctest::Approx(std::sqrt(e2.variance)));
    CHECK(m2.mean == doctest::Approx(0.5));
    CHECK(m2.sigma == doctest::Approx(0.5));

    const auto m1 = pair_moments(1, 0.3, 0.4);
    CHECK(m1.mean == 0.0);
    CHECK(m1.sigma == 0.0);

    const double three[] = {0.5, 0.3, 0.2};
    const auto e3 = oracle::enumerate_pair_moments(3, three, 0, 1);
    const auto m3 = pair_moments(3, 0.5, 0.3);
    CHECK(e3.mean == doctest::Approx(0.9));
    CHECK(std::sqrt(e3.variance) == doctest::Approx(0.9));
    CHECK(m3.mean == doctest::Approx(e3.mean).epsilon(1e-12));
    CHECK(m3.sigma == doctest::Approx(std::sqrt(e3.variance)).epsilon(1e-12));
}

TEST_CASE("pair_moments domain") {
    CHECK_THROWS_AS(pair_moments(3, 0.7, 0.4), DomainError);
    CHECK_THROWS_AS(pair_moments(3, -0.1, 0.4), DomainError);
    // p_i + p_j == 1 is allowed; only two countries edit
    const auto m = pair_moments(4, 0.5, 0.5);
    CHECK(m.sigma > 0.0);
    const auto z = pair_moments(4, 0.0, 0.5);
    CHECK(z.mean == 0.0);
    CHECK(z.sigma == 0.0);
}

TEST_CASE("article_z examples") {
    const auto corpus = corpus_of({{"x", {{cc("AA"), 1}, {cc("BB"), 1}}}, {"y", {{cc("AA"), 2}}}, {"z", {{cc("BB"), 2}}}});
    // shares: AA 3/6, BB 3/6
    CHECK(corpus.activity.shares[0] == 0.5);
    const auto s1 = article_z(corpus.articles[0], corpus.activity, cc("AA"), cc("BB"));
    CHECK(s1.weight == 1);
    CHECK(s1.z == doctest::Approx(1.0));
    const auto s2 = article_z(corpus.articles[1], corpus.activity, cc("AA"), cc("BB"));
    CHECK(s2.weight == 0);
    CHECK(s2.z == doctest::Approx(-1.0));
    CHECK(article_z(corpus.articles[0], corpus.activity, cc("BB"), cc("AA")).z == doctest::Approx(1.0));
    CHECK_THROWS_AS(article_z(corpus.articles[0], corpus.activity, cc("AA"), cc("ZZ")), LookupError);
    CHECK_THROWS_AS(article_z(corpus.articles[0], corpus.activity, cc("AA"), cc("AA")), DomainError);

    const auto single = corpus_of({{"x", {{cc("AA"), 1}}}, {"y", {{cc("BB"), 1}}}});
    CHECK(article_z(single.articles[0], single.activity, cc("AA"), cc("BB")).z == 0.0);
}

TEST_CASE("cumulative_z examples") {
    const auto one = corpus_of({{"x", {{cc("AA"), 1}, {cc("BB"), 1}}}});
    CHECK(cumulative_z(one, CountryPair(0, 1)) == doctest::Approx(1.0));

    const auto two = corpus_of({{"x", {{cc("AA"), 1}, {cc("BB"), 1}}}, {"y", {{cc("AA"), 1}, {cc("BB"), 1}}}});
    CHECK(cumulative_z(two, CountryPair(0, 1)) == doctest::Approx(2.0));

    // a country with zero share: build profiles against a wider country list
    std::vector<ArticleEditProfile> profiles = {{"x", {{0, 1}, {1, 1}}, 2}};
    const std::vector<CountryCode> countries = {cc("AA"), cc("BB")};
    const auto rebuilt = corpus_from_profiles(profiles, countries);
    CHECK(cumulative_z(rebuilt, CountryPair(0, 1)) == doctest::Approx(1.0));

    Corpus with_zero = one;
    with_zero.activity.countries.push_back(cc("CC"));
    with_zero.activity.totals.push_back(0);
    with_zero.activity.shares.push_back(0.0);
    CHECK(cumulative_z(with_zero, CountryPair(0, 2)) == 0.0);
}

TEST_CASE("significance_threshold") {
    CHECK(significance_threshold(234, 10000, 0.05) == doctest::Approx(352.0).epsilon(0.5 / 352.0));
    CHECK(std::abs(significance_threshold(234, 1, 0.05) - 3.52) <= 0.01);
    CHECK(significance_threshold(2, 1, 0.05) == doctest::Approx(oracle::normal_quantile(0.975)).epsilon(1e-9));
    CHECK(significance_threshold(2, 1, 0.05) == doctest::Approx(1.959964).epsilon(1e-6));
    for (std::size_t n : {3u, 20u, 234u}) {
        for (double alpha : {0.01, 0.05, 0.1}) {
            CHECK(significance_threshold(n, 1, alpha) ==
                  doctest::Approx(oracle::normal_quantile(1.0 - alpha / n)).epsilon(1e-8));
        }
    }
    CHECK_THROWS_AS(significance_threshold(0, 1, 0.05), DomainError);
    CHECK_THROWS_AS(significance_threshold(10, 1, 0.0), DomainError);
    CHECK_THROWS_AS(significance_threshold(10, 1, 1.5), DomainError);
}

TEST_CASE("filter_links boundaries") {
    const std::vector<PairZ> z = {{CountryPair(0, 1), 400.0}, {CountryPair(0, 2), 352.0}, {CountryPair(1, 2), -10.0},
                                  {CountryPair(2, 3), 360.0}};
    const auto links = filter_links(z, 352.0);
    REQUIRE(links.size() == 2);
    CHECK(links[0].pair == CountryPair(0, 1));
    CHECK(links[0].weight == doctest::Approx(48.0));
    CHECK(links[1].pair == CountryPair(2, 3));
    CHECK(links[1].weight == doctest::Approx(8.0));
    for (const auto& l : links) CHECK(l.pair.first < l.pair.second);
    CHECK(filter_links({}, 3.0).empty());
    CHECK_THROWS_AS(filter_links(z, -1.0), DomainError);
    CHECK(CountryPair(3, 1) == CountryPair(1, 3));
    CHECK_THROWS_AS(CountryPair(2, 2), DomainError);
}

TEST_CASE("null_model_sample") {
    SUBCASE("degenerate distribution") {
        CountryActivity act;
        act.countries = {cc("AA")};
        act.totals = {1};
        act.shares = {1.0};
        const std::uint64_t sizes[] = {3};
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto p = null_model_sample(act, sizes, seed);
            REQUIRE(p.size() == 1);
            CHECK(p[0].total == 3);
            CHECK(p[0].count_of(0) == 3);
        }
    }
    SUBCASE("Monte-Carlo mean of w and determinism") {
        CountryActivity act;
        act.countries = {cc("AA"), cc("BB")};
        act.totals = {1, 1};
        act.shares = {0.5, 0.5};
        const std::vector<std::uint64_t> sizes(1000000, 2);
        const auto p = null_model_sample(act, sizes, 99);
        double sum = 0.0;
        for (const auto& a : p) sum += static_cast<double>(empirical_weight(a.count_of(0), a.count_of(1)));
        const double mean = sum / static_cast<double>(p.size());
        const double se = 0.5 / std::sqrt(static_cast<double>(p.size()));
        CHECK(std::abs(mean - 0.5) < 3.0 * se);

        const std::vector<std::uint64_t> few(50, 7);
        CHECK(null_model_sample(act, few, 5) == null_model_sample(act, few, 5));
        CHECK(null_model_sample(act, few, 5) != null_model_sample(act, few, 6));
    }
}

TEST_CASE("per-article z has mean 0 and variance 1 under the null") {
    const double shares[] = {0.5, 0.3, 0.2};
    MultinomialSampler sampler(shares);
    Rng rng(17);
    for (std::uint64_t n : {2u, 4u, 9u}) {
        const auto m01 = pair_moments(n, 0.5, 0.3);
        const auto m12 = pair_moments(n, 0.3, 0.2);
        double s01 = 0, q01 = 0, s12 = 0, q12 = 0;
        const int reps = 200000;
        std::uint64_t counts[3];
        for (int r = 0; r < reps; ++r) {
            std::fill(std::begin(counts), std::end(counts), 0);
            sampler.draw(rng, n, counts);
            const double z01 = (static_cast<double>(counts[0] * counts[1]) - m01.mean) / m01.sigma;
            const double z12 = (static_cast<double>(counts[1] * counts[2]) - m12.mean) / m12.sigma;
            s01 += z01;
            q01 += z01 * z01;
            s12 += z12;
            q12 += z12 * z12;
        }
        CHECK(std::abs(s01 / reps) < 0.02);
        CHECK(std::abs(q01 / reps - 1.0) < 0.05);
        CHECK(std::abs(s12 / reps) < 0.02);
        CHECK(std::abs(q12 / reps - 1.0) < 0.05);
    }
}

TEST_CASE("grouped and naive cumulative_z agree") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto corpus = synth::null_corpus(2000, 12, seed, 1, 15);
        const auto naive = cumulative_z_naive(corpus);
        const auto grouped = cumulative_z_grouped(corpus);
        const auto a = naive.entries();
        const auto b = grouped.entries();
        REQUIRE(a.size() == b.size());
        REQUIRE(a.size() == corpus.activity.country_count() * (corpus.activity.country_count() - 1) / 2);
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a[k].pair == b[k].pair);
            CHECK(std::abs(a[k].z_sum - b[k].z_sum) <= 1e-9 * std::max(1.0, std::abs(a[k].z_sum)));
            CHECK(cumulative_z(corpus, a[k].pair) == doctest::Approx(a[k].z_sum).epsilon(1e-12));
        }
    }
    const auto planted = ingest(synth::planted_corpus({.articles = 500}, 4).edits, GeoTable{}).corpus;
    const auto a = cumulative_z_naive(planted).entries();
    const auto b = cumulative_z_grouped(planted).entries();
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(std::abs(a[k].z_sum - b[k].z_sum) <= 1e-9 * std::max(1.0, std::abs(a[k].z_sum)));
    }
}

TEST_CASE("PairZTable indexing covers every pair once") {
    PairZTable t(5);
    double v = 1.0;
    for (CountryIndex i = 0; i < 5; ++i) {
        for (CountryIndex j = i + 1; j < 5; ++j) t.at(CountryPair(i, j)) = v++;
    }
    const auto e = t.entries();
    REQUIRE(e.size() == 10);
    for (std::size_t k = 0; k < e.size(); ++k) CHECK(e[k].z_sum == static_cast<double>(k + 1));
}
