#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cointerest/error.hpp"
#include "cointerest/network.hpp"
#include "cointerest/rng.hpp"
#include "cointerest/synth.hpp"

using namespace cointerest;

namespace {

CountryCode cc(const char* s) { return CountryCode::parse(s); }

Link link(const char* a, const char* b, double w, double z = 0.0) { return {cc(a), cc(b), z == 0.0 ? w + 3.0 : z, w}; }

}  // namespace

TEST_CASE("build_network") {
    const std::vector<Link> tri = {link("AA", "BB", 1.0), link("BB", "CC", 2.0), link("AA", "CC", 3.0)};
    const auto net = build_network(tri);
    CHECK(net.node_count() == 3);
    CHECK(net.edges().size() == 3);
    CHECK(net.has_edge(cc("CC"), cc("AA")));
    CHECK(net.strength(*net.index_of(cc("AA"))) == doctest::Approx(4.0));
    CHECK(net.total_weight() == doctest::Approx(6.0));

    CHECK(build_network({}).node_count() == 0);

    const std::vector<Link> dup = {link("AA", "BB", 5.0), link("AA", "BB", 5.0)};
    CHECK_THROWS_AS(build_network(dup), ValidationError);
    const std::vector<Link> rev = {link("AA", "BB", 5.0), link("BB", "AA", 5.0)};
    CHECK_THROWS_AS(build_network(rev), ValidationError);
    const std::vector<Link> self = {link("AA", "AA", 5.0)};
    CHECK_THROWS_AS(build_network(self), ValidationError);
    const std::vector<Link> zero = {{cc("AA"), cc("BB"), 1.0, 0.0}};
    CHECK_THROWS_AS(build_network(zero), ValidationError);
}

TEST_CASE("rank_articles") {
    const auto corpus = make_corpus({
        {"a1", {{cc("AA"), 3}, {cc("BB"), 3}}},
        {"a2", {{cc("AA"), 1}, {cc("BB"), 1}, {cc("CC"), 2}}},
        {"a3", {{cc("CC"), 4}}},
        {"a4", {{cc("AA"), 2}, {cc("CC"), 1}}},
    });
    const std::vector<Link> links = {link("AA", "BB", 1.0)};
    const auto net = build_network(links);

    const auto r = rank_articles(corpus, net, cc("AA"), cc("BB"), 10);
    CHECK_FALSE(r.warning.has_value());
    REQUIRE(r.articles.size() == 4);
    // oracle: article_z on each profile, sorted by hand
    std::vector<std::pair<double, std::string>> expected;
    for (const auto& a : corpus.articles) {
        expected.emplace_back(-article_z(a, corpus.activity, cc("AA"), cc("BB")).z, a.article_id);
    }
    std::sort(expected.begin(), expected.end());
    for (std::size_t k = 0; k < expected.size(); ++k) {
        CHECK(r.articles[k].article_id == expected[k].second);
        CHECK(r.articles[k].z == doctest::Approx(-expected[k].first));
    }
    CHECK(r.articles[0].article_id == "a1");

    CHECK(rank_articles(corpus, net, cc("AA"), cc("BB"), 0).articles.empty());
    CHECK(rank_articles(corpus, net, cc("AA"), cc("BB"), 2).articles.size() == 2);
    const auto ns = rank_articles(corpus, net, cc("AA"), cc("CC"), 5);
    CHECK(ns.warning.has_value());
    CHECK(ns.articles.size() == 4);
}

TEST_CASE("rank_articles: single co-edited article ranks first") {
    const auto corpus = make_corpus({
        {"m", {{cc("AA"), 1}, {cc("BB"), 1}}},
        {"n", {{cc("AA"), 5}}},
        {"o", {{cc("BB"), 5}}},
        {"p", {{cc("CC"), 5}}},
    });
    const std::vector<Link> links = {link("AA", "BB", 1.0)};
    const auto r = rank_articles(corpus, build_network(links), cc("AA"), cc("BB"), 3);
    CHECK(r.articles.at(0).article_id == "m");
}

TEST_CASE("rank_articles order does not depend on ingest sharding") {
    const auto planted = synth::planted_corpus({.articles = 400}, 8);
    const auto c1 = ingest(planted.edits, GeoTable{}, 1).corpus;
    auto shuffled = planted.edits;
    Rng rng(3);
    rng.shuffle(std::span<EditRecord>(shuffled));
    const auto c2 = ingest(shuffled, GeoTable{}, 4).corpus;
    const std::vector<Link> links = {{planted.countries[0], planted.countries[1], 10.0, 5.0}};
    const auto net = build_network(links);
    const auto r1 = rank_articles(c1, net, planted.countries[0], planted.countries[1], 20);
    const auto r2 = rank_articles(c2, net, planted.countries[0], planted.countries[1], 20);
    REQUIRE(r1.articles.size() == r2.articles.size());
    for (std::size_t k = 0; k < r1.articles.size(); ++k) {
        CHECK(r1.articles[k].article_id == r2.articles[k].article_id);
        CHECK(r1.articles[k].z == r2.articles[k].z);
    }
}

TEST_CASE("aggregate_clusters") {
    const std::vector<Link> links = {link("AA", "BB", 2.0, 7.0), link("BB", "CC", 3.0, 8.0)};
    const auto net = build_network(links);

    SUBCASE("one cluster") {
        const CountryPartition p = {{cc("AA"), 0}, {cc("BB"), 0}, {cc("CC"), 0}};
        const auto cn = aggregate_clusters(net, p);
        REQUIRE(cn.nodes.size() == 1);
        CHECK(cn.links.empty());
        CHECK(cn.nodes[0].size == doctest::Approx(15.0));
        CHECK(cn.nodes[0].internal_weight == doctest::Approx(5.0));
    }
    SUBCASE("singletons") {
        const CountryPartition p = {{cc("AA"), 0}, {cc("BB"), 1}, {cc("CC"), 2}};
        const auto cn = aggregate_clusters(net, p);
        CHECK(cn.nodes.size() == 3);
        REQUIRE(cn.links.size() == 2);
        CHECK(cn.links[0].a == 0);
        CHECK(cn.links[0].b == 1);
        CHECK(cn.links[0].weight == 2.0);
        CHECK(cn.links[1].weight == 3.0);
    }
    SUBCASE("hand aggregation") {
        const CountryPartition p = {{cc("AA"), 0}, {cc("BB"), 0}, {cc("CC"), 1}};
        const auto cn = aggregate_clusters(net, p);
        REQUIRE(cn.links.size() == 1);
        CHECK(cn.links[0].weight == doctest::Approx(3.0));
        CHECK(cn.nodes[0].members == std::vector<CountryCode>{cc("AA"), cc("BB")});
    }
    SUBCASE("missing node") {
        const CountryPartition p = {{cc("AA"), 0}, {cc("BB"), 0}};
        CHECK_THROWS_AS(aggregate_clusters(net, p), ValidationError);
    }
}

TEST_CASE("aggregation conserves weight on random networks") {
    Rng rng(21);
    const auto codes = synth::country_codes(15);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<Link> links;
        for (std::size_t i = 0; i < codes.size(); ++i) {
            for (std::size_t j = i + 1; j < codes.size(); ++j) {
                if (rng.uniform() < 0.3) links.push_back({codes[i], codes[j], 5.0, 0.1 + rng.uniform() * 9.0});
            }
        }
        const auto net = build_network(links);
        CountryPartition p;
        for (const auto c : net.nodes()) p[c] = static_cast<std::uint32_t>(rng.below(4));
        const auto cn = aggregate_clusters(net, p);
        double total = 0.0;
        for (const auto& l : cn.links) total += l.weight;
        for (const auto& n : cn.nodes) total += n.internal_weight;
        CHECK(total == doctest::Approx(net.total_weight()).epsilon(1e-12));
    }
}

TEST_CASE("strongest_intra_cluster_links") {
    const std::vector<Link> links = {link("AA", "BB", 5.0), link("BB", "CC", 4.0), link("AA", "CC", 1.0),
                                     link("DD", "EE", 2.0), link("CC", "DD", 9.0)};
    const auto net = build_network(links);
    const CountryPartition p = {{cc("AA"), 0}, {cc("BB"), 0}, {cc("CC"), 0}, {cc("DD"), 1}, {cc("EE"), 1}};

    const auto top2 = strongest_intra_cluster_links(net, p, 0, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0].weight == 5.0);
    CHECK(top2[1].weight == 4.0);

    CHECK(strongest_intra_cluster_links(net, p, 0, 10).size() == 3);
    const auto pair = strongest_intra_cluster_links(net, p, 1, 5);
    REQUIRE(pair.size() == 1);
    CHECK(pair[0].a == cc("DD"));
    CHECK(pair[0].b == cc("EE"));
    CHECK_THROWS_AS(strongest_intra_cluster_links(net, p, 7, 2), LookupError);
}
