#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cointerest::mapeq {

struct WeightedEdge {
    std::uint32_t u;
    std::uint32_t v;
    double weight;
};

/// Stationary flow of an undirected weighted random walk without
/// teleportation: node visit rate = strength / total strength, and each
/// edge carries weight / total strength in each direction.
class FlowNetwork {
public:
    struct Arc {
        std::uint32_t target;
        double flow;
    };

    FlowNetwork() = default;

    /// Parallel edges are merged. Throws ValidationError for self-loops,
    /// out-of-range endpoints and non-positive or non-finite weights.
    /// Nodes without edges carry no flow and are reported in warnings().
    FlowNetwork(std::size_t node_count, std::span<const WeightedEdge> edges);

    std::size_t node_count() const { return flow_.size(); }
    double flow(std::uint32_t node) const { return flow_[node]; }
    std::span<const Arc> arcs(std::uint32_t node) const { return adjacency_[node]; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::vector<double> flow_;
    std::vector<std::vector<Arc>> adjacency_;
    std::vector<std::string> warnings_;
};

struct Partition {
    /// Module of every node, numbered by first appearance in node order.
    std::vector<std::uint32_t> module_of;
    /// Bits per step.
    double codelength = 0.0;

    std::uint32_t module_count() const;
};

/// Renumbers modules by first appearance in node order.
std::vector<std::uint32_t> canonical_labels(std::span<const std::uint32_t> module_of);

/// Two-level map equation
///   L = q H(Q) + sum_m p_m H(P^m)
/// in bits. Throws ValidationError if the assignment size does not match.
double codelength(const FlowNetwork& network, std::span<const std::uint32_t> module_of);

struct SearchOptions {
    std::uint64_t seed = 1;
    unsigned trials = 10;
};

/// Best partition over `trials` seeded restarts of a Louvain-style search on
/// the map equation: randomized greedy node moves, aggregation of modules
/// into super-nodes and repetition, with a node-level refinement pass after
/// each coarse pass. The single-module partition is kept as a candidate.
/// Deterministic for a given seed.
Partition optimize(const FlowNetwork& network, const SearchOptions& options = {});

/// Exhaustive minimum over all set partitions (Bell(n) candidates).
/// Throws DomainError for more than 10 nodes.
Partition brute_force_partition(const FlowNetwork& network);

}  // namespace cointerest::mapeq
