#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cointerest/corpus.hpp"
#include "cointerest/null_model.hpp"

namespace cointerest {

/// A significant link as it appears in the links file.
struct Link {
    CountryCode a;
    CountryCode b;
    double z_sum = 0.0;
    double weight = 0.0;
};

std::vector<Link> to_links(std::span<const PairStatistic> pairs, const CountryActivity& activity);

/// Undirected network of countries joined by significant links.
class InterestNetwork {
public:
    struct Edge {
        std::uint32_t u;  // u < v, indices into nodes()
        std::uint32_t v;
        double weight;
        double z_sum;
    };

    InterestNetwork() = default;

    /// Nodes are the countries touched by at least one link, in code order.
    /// Throws ValidationError for self-loops, non-positive weights and
    /// duplicate pairs.
    explicit InterestNetwork(std::span<const Link> links);

    std::span<const CountryCode> nodes() const { return nodes_; }
    std::span<const Edge> edges() const { return edges_; }
    std::size_t node_count() const { return nodes_.size(); }
    std::optional<std::uint32_t> index_of(CountryCode code) const;
    double strength(std::uint32_t node) const { return strength_[node]; }
    bool has_edge(CountryCode a, CountryCode b) const;
    double total_weight() const;

private:
    std::vector<CountryCode> nodes_;
    std::vector<Edge> edges_;
    std::vector<double> strength_;
};

inline InterestNetwork build_network(std::span<const Link> links) { return InterestNetwork(links); }

/// Country -> cluster id.
using CountryPartition = std::map<CountryCode, std::uint32_t>;

struct ArticleScore {
    std::string article_id;
    double z = 0.0;
};

struct ArticleRanking {
    std::vector<ArticleScore> articles;
    /// Set when the pair is not a link of the network; the ranking is still
    /// computed.
    std::optional<std::string> warning;
};

/// Articles by per-article z-score of the pair, descending, ties by article
/// id ascending; at most `top_k` entries.
ArticleRanking rank_articles(const Corpus& corpus, const InterestNetwork& network, CountryCode a, CountryCode b,
                             std::size_t top_k);

struct ClusterNode {
    std::uint32_t cluster = 0;
    std::vector<CountryCode> members;
    /// Sum of z_sum over significant pairs inside the cluster.
    double size = 0.0;
    /// Sum of filtered weights inside the cluster.
    double internal_weight = 0.0;
};

struct ClusterLink {
    std::uint32_t a = 0;  // a < b
    std::uint32_t b = 0;
    double weight = 0.0;
};

struct ClusterNetwork {
    std::vector<ClusterNode> nodes;  // ascending cluster id
    std::vector<ClusterLink> links;  // ascending (a, b)
};

/// Collapses each cluster to one node. Throws ValidationError when a network
/// node has no cluster.
ClusterNetwork aggregate_clusters(const InterestNetwork& network, const CountryPartition& partition);

/// Heaviest edges with both ends in `cluster`, weight descending, ties by
/// country codes. Throws LookupError for an unknown cluster.
std::vector<Link> strongest_intra_cluster_links(const InterestNetwork& network, const CountryPartition& partition,
                                                std::uint32_t cluster, std::size_t top_k);

}  // namespace cointerest
