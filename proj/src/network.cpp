#include <algorithm>
#include <set>

#include "cointerest/error.hpp"
#include "cointerest/network.hpp"

namespace cointerest {

std::vector<Link> to_links(std::span<const PairStatistic> pairs, const CountryActivity& activity) {
    std::vector<Link> links;
    links.reserve(pairs.size());
    for (const auto& p : pairs) {
        links.push_back({activity.countries.at(p.pair.first), activity.countries.at(p.pair.second), p.z_sum,
                         p.weight});
    }
    return links;
}

InterestNetwork::InterestNetwork(std::span<const Link> links) {
    std::set<CountryCode> codes;
    std::set<std::pair<CountryCode, CountryCode>> seen;
    for (const auto& l : links) {
        if (l.a == l.b) throw ValidationError("self-loop on " + l.a.str());
        if (!(l.weight > 0.0)) {
            throw ValidationError("non-positive weight on link " + l.a.str() + "-" + l.b.str());
        }
        if (!seen.insert(std::minmax(l.a, l.b)).second) {
            throw ValidationError("duplicate link " + l.a.str() + "-" + l.b.str());
        }
        codes.insert(l.a);
        codes.insert(l.b);
    }
    nodes_.assign(codes.begin(), codes.end());
    strength_.assign(nodes_.size(), 0.0);
    for (const auto& l : links) {
        auto u = *index_of(l.a), v = *index_of(l.b);
        if (u > v) std::swap(u, v);
        edges_.push_back({u, v, l.weight, l.z_sum});
        strength_[u] += l.weight;
        strength_[v] += l.weight;
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& x, const Edge& y) { return std::tie(x.u, x.v) < std::tie(y.u, y.v); });
}

std::optional<std::uint32_t> InterestNetwork::index_of(CountryCode code) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), code);
    if (it == nodes_.end() || *it != code) return std::nullopt;
    return static_cast<std::uint32_t>(it - nodes_.begin());
}

bool InterestNetwork::has_edge(CountryCode a, CountryCode b) const {
    auto u = index_of(a), v = index_of(b);
    if (!u || !v || *u == *v) return false;
    const auto key = std::minmax(*u, *v);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{key.first, key.second, 0.0, 0.0},
                              [](const Edge& x, const Edge& y) { return std::tie(x.u, x.v) < std::tie(y.u, y.v); });
}

double InterestNetwork::total_weight() const {
    double total = 0.0;
    for (const auto& e : edges_) total += e.weight;
    return total;
}

ArticleRanking rank_articles(const Corpus& corpus, const InterestNetwork& network, CountryCode a, CountryCode b,
                             std::size_t top_k) {
    ArticleRanking ranking;
    if (!network.has_edge(a, b)) {
        ranking.warning = "pair " + a.str() + "-" + b.str() + " is not a significant link";
    }
    if (top_k == 0) return ranking;

    const CountryPair pair(corpus.activity.require_index(a), corpus.activity.require_index(b));
    std::vector<ArticleScore> scores;
    scores.reserve(corpus.articles.size());
    for (const auto& article : corpus.articles) {
        scores.push_back({article.article_id, article_z(article, corpus.activity, pair).z});
    }
    const auto k = std::min(top_k, scores.size());
    std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k), scores.end(),
                      [](const ArticleScore& x, const ArticleScore& y) {
                          if (x.z != y.z) return x.z > y.z;
                          return x.article_id < y.article_id;
                      });
    scores.resize(k);
    ranking.articles = std::move(scores);
    return ranking;
}

namespace {

std::vector<std::uint32_t> cluster_of_nodes(const InterestNetwork& network, const CountryPartition& partition) {
    std::vector<std::uint32_t> cluster(network.node_count());
    for (std::size_t i = 0; i < network.node_count(); ++i) {
        auto it = partition.find(network.nodes()[i]);
        if (it == partition.end()) {
            throw ValidationError("country " + network.nodes()[i].str() + " is missing from the partition");
        }
        cluster[i] = it->second;
    }
    return cluster;
}

}  // namespace

ClusterNetwork aggregate_clusters(const InterestNetwork& network, const CountryPartition& partition) {
    const auto cluster = cluster_of_nodes(network, partition);

    std::map<std::uint32_t, ClusterNode> nodes;
    for (std::size_t i = 0; i < network.node_count(); ++i) {
        auto& node = nodes[cluster[i]];
        node.cluster = cluster[i];
        node.members.push_back(network.nodes()[i]);
    }
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> between;
    for (const auto& e : network.edges()) {
        const auto cu = cluster[e.u], cv = cluster[e.v];
        if (cu == cv) {
            nodes[cu].size += e.z_sum;
            nodes[cu].internal_weight += e.weight;
        } else {
            between[std::minmax(cu, cv)] += e.weight;
        }
    }

    ClusterNetwork out;
    for (auto& [id, node] : nodes) out.nodes.push_back(std::move(node));
    for (const auto& [key, weight] : between) out.links.push_back({key.first, key.second, weight});
    return out;
}

std::vector<Link> strongest_intra_cluster_links(const InterestNetwork& network, const CountryPartition& partition,
                                                std::uint32_t cluster, std::size_t top_k) {
    const auto assignment = cluster_of_nodes(network, partition);
    bool exists = false;
    for (const auto& [code, id] : partition) exists = exists || id == cluster;
    if (!exists) throw LookupError("unknown cluster " + std::to_string(cluster));

    std::vector<Link> links;
    for (const auto& e : network.edges()) {
        if (assignment[e.u] == cluster && assignment[e.v] == cluster) {
            links.push_back({network.nodes()[e.u], network.nodes()[e.v], e.z_sum, e.weight});
        }
    }
    std::sort(links.begin(), links.end(), [](const Link& x, const Link& y) {
        if (x.weight != y.weight) return x.weight > y.weight;
        return std::tie(x.a, x.b) < std::tie(y.a, y.b);
    });
    if (links.size() > top_k) links.resize(top_k);
    return links;
}

}  // namespace cointerest
