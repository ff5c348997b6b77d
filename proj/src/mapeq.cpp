#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "cointerest/error.hpp"
#include "cointerest/mapeq.hpp"
#include "cointerest/rng.hpp"

namespace cointerest::mapeq {

namespace {

constexpr double kMinImprovement = 1e-12;

double plogp(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

/// One level of the search hierarchy. At level 0 every unit is a node; above
/// that every unit is a module of the level below.
struct Level {
    std::vector<double> flow;
    std::vector<double> exit;
    std::vector<std::vector<FlowNetwork::Arc>> adjacency;  // no self arcs

    std::size_t size() const { return flow.size(); }
};

Level base_level(const FlowNetwork& net) {
    Level level;
    const auto n = net.node_count();
    level.flow.resize(n);
    level.exit.resize(n);
    level.adjacency.resize(n);
    for (std::uint32_t u = 0; u < n; ++u) {
        level.flow[u] = net.flow(u);
        const auto arcs = net.arcs(u);
        level.adjacency[u].assign(arcs.begin(), arcs.end());
        double out = 0.0;
        for (const auto& a : arcs) out += a.flow;
        level.exit[u] = out;
    }
    return level;
}

/// Module bookkeeping for greedy moves on one level.
class ModuleState {
public:
    ModuleState(const Level& level, std::vector<std::uint32_t> module_of)
        : level_(level), module_of_(std::move(module_of)) {
        const auto n = level.size();
        flow_.assign(n, 0.0);
        exit_.assign(n, 0.0);
        members_.assign(n, 0);
        for (std::uint32_t u = 0; u < n; ++u) {
            const auto m = module_of_[u];
            flow_[m] += level.flow[u];
            exit_[m] += level.exit[u];
            ++members_[m];
            for (const auto& a : level.adjacency[u]) {
                if (module_of_[a.target] == m) exit_[m] -= a.flow;
            }
        }
        for (std::uint32_t m = 0; m < n; ++m) {
            if (members_[m] == 0) free_.push_back(m);
            total_exit_ += exit_[m];
        }
        weight_to_.assign(n, 0.0);
    }

    /// One randomized sweep over all units; returns the number of moves.
    std::size_t sweep(Rng& rng) {
        std::vector<std::uint32_t> order(level_.size());
        std::iota(order.begin(), order.end(), 0u);
        rng.shuffle(std::span<std::uint32_t>(order));
        std::size_t moves = 0;
        for (auto u : order) moves += try_move(u) ? 1 : 0;
        return moves;
    }

    /// Sweeps until a sweep makes no move. Returns whether anything moved.
    bool converge(Rng& rng) {
        bool any = false;
        for (int guard = 0; guard < 10000 && sweep(rng) > 0; ++guard) any = true;
        return any;
    }

    const std::vector<std::uint32_t>& module_of() const { return module_of_; }

private:
    bool try_move(std::uint32_t u) {
        const auto& arcs = level_.adjacency[u];
        if (arcs.empty()) return false;
        const auto from = module_of_[u];
        const double pu = level_.flow[u], eu = level_.exit[u];

        touched_.clear();
        for (const auto& a : arcs) {
            const auto m = module_of_[a.target];
            if (weight_to_[m] == 0.0) touched_.push_back(m);
            weight_to_[m] += a.flow;
        }
        const double w_from = weight_to_[from];

        const double exit_from = exit_[from] - eu + 2.0 * w_from;
        const double flow_from = flow_[from] - pu;
        const double total_without = total_exit_ - exit_[from] + exit_from;
        const double old_terms = plogp(total_exit_) - 2.0 * plogp(exit_[from]) + plogp(exit_[from] + flow_[from]);

        double best_delta = -kMinImprovement;
        std::uint32_t best = from;
        auto consider = [&](std::uint32_t to, double w_to) {
            const double exit_to = exit_[to] + eu - 2.0 * w_to;
            const double flow_to = flow_[to] + pu;
            const double total = total_without - exit_[to] + exit_to;
            const double delta = plogp(total) - 2.0 * (plogp(exit_from) + plogp(exit_to)) +
                                 plogp(exit_from + flow_from) + plogp(exit_to + flow_to) -
                                 (old_terms - 2.0 * plogp(exit_[to]) + plogp(exit_[to] + flow_[to]));
            if (delta < best_delta) {
                best_delta = delta;
                best = to;
            }
        };
        for (auto m : touched_) {
            if (m != from) consider(m, weight_to_[m]);
        }
        if (members_[from] > 1 && !free_.empty()) consider(free_.back(), 0.0);

        const double w_best = best == from ? 0.0 : weight_to_[best];
        for (auto m : touched_) weight_to_[m] = 0.0;
        if (best == from) return false;

        if (members_[best] == 0) free_.pop_back();
        const double exit_to = exit_[best] + eu - 2.0 * w_best;
        total_exit_ += (exit_from - exit_[from]) + (exit_to - exit_[best]);
        exit_[from] = exit_from;
        flow_[from] = flow_from;
        exit_[best] = exit_to;
        flow_[best] += pu;
        --members_[from];
        ++members_[best];
        if (members_[from] == 0) {
            exit_[from] = 0.0;
            flow_[from] = 0.0;
            free_.push_back(from);
        }
        module_of_[u] = best;
        return true;
    }

    const Level& level_;
    std::vector<std::uint32_t> module_of_;
    std::vector<double> flow_;
    std::vector<double> exit_;
    std::vector<std::uint32_t> members_;
    std::vector<std::uint32_t> free_;
    double total_exit_ = 0.0;
    std::vector<double> weight_to_;
    std::vector<std::uint32_t> touched_;
};

/// Collapses each module of `level` into one unit. `module_of` must be
/// canonical (0..K-1).
Level aggregate(const Level& level, const std::vector<std::uint32_t>& module_of, std::uint32_t modules) {
    Level out;
    out.flow.assign(modules, 0.0);
    out.exit.assign(modules, 0.0);
    out.adjacency.resize(modules);
    std::vector<std::map<std::uint32_t, double>> between(modules);
    for (std::uint32_t u = 0; u < level.size(); ++u) {
        const auto m = module_of[u];
        out.flow[m] += level.flow[u];
        out.exit[m] += level.exit[u];
        for (const auto& a : level.adjacency[u]) {
            const auto t = module_of[a.target];
            if (t == m) {
                out.exit[m] -= a.flow;
            } else {
                between[m][t] += a.flow;
            }
        }
    }
    for (std::uint32_t m = 0; m < modules; ++m) {
        for (const auto& [t, f] : between[m]) out.adjacency[m].push_back({t, f});
    }
    return out;
}

std::vector<std::uint32_t> identity(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0u);
    return v;
}

std::uint32_t count_modules(const std::vector<std::uint32_t>& canonical) {
    return canonical.empty() ? 0 : *std::max_element(canonical.begin(), canonical.end()) + 1;
}

std::vector<std::uint32_t> run_trial(const FlowNetwork& net, const Level& base, Rng& rng) {
    auto assignment = identity(base.size());
    double previous = std::numeric_limits<double>::infinity();

    for (int round = 0; round < 50; ++round) {
        // node-level moves (from singletons in the first round, refinement after)
        {
            ModuleState state(base, assignment);
            state.converge(rng);
            assignment = canonical_labels(state.module_of());
        }
        // coarse passes: move whole modules
        Level level = aggregate(base, assignment, count_modules(assignment));
        while (level.size() > 1) {
            ModuleState state(level, identity(level.size()));
            if (!state.converge(rng)) break;
            const auto merged = canonical_labels(state.module_of());
            for (auto& m : assignment) m = merged[m];
            level = aggregate(level, merged, count_modules(merged));
        }
        const double current = codelength(net, assignment);
        if (!(current < previous - kMinImprovement)) break;
        previous = current;
    }
    return assignment;
}

}  // namespace

FlowNetwork::FlowNetwork(std::size_t node_count, std::span<const WeightedEdge> edges) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> merged;
    for (const auto& e : edges) {
        if (e.u >= node_count || e.v >= node_count) throw ValidationError("edge endpoint out of range");
        if (e.u == e.v) throw ValidationError("self-loop on node " + std::to_string(e.u));
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
            throw ValidationError("edge weights must be positive and finite");
        }
        merged[std::minmax(e.u, e.v)] += e.weight;
    }
    double total = 0.0;
    for (const auto& [key, w] : merged) total += 2.0 * w;

    flow_.assign(node_count, 0.0);
    adjacency_.resize(node_count);
    for (const auto& [key, w] : merged) {
        const double f = w / total;
        adjacency_[key.first].push_back({key.second, f});
        adjacency_[key.second].push_back({key.first, f});
    }
    for (std::uint32_t u = 0; u < node_count; ++u) {
        auto& adj = adjacency_[u];
        std::sort(adj.begin(), adj.end(), [](const Arc& a, const Arc& b) { return a.target < b.target; });
        double s = 0.0;
        for (const auto& a : adj) s += a.flow;
        flow_[u] = s;
        if (adj.empty()) warnings_.push_back("node " + std::to_string(u) + " has zero strength and carries no flow");
    }
}

std::uint32_t Partition::module_count() const { return count_modules(module_of); }

std::vector<std::uint32_t> canonical_labels(std::span<const std::uint32_t> module_of) {
    std::map<std::uint32_t, std::uint32_t> relabel;
    std::vector<std::uint32_t> out;
    out.reserve(module_of.size());
    for (auto m : module_of) {
        auto [it, inserted] = relabel.try_emplace(m, static_cast<std::uint32_t>(relabel.size()));
        out.push_back(it->second);
    }
    return out;
}

double codelength(const FlowNetwork& network, std::span<const std::uint32_t> module_of) {
    const auto n = network.node_count();
    if (module_of.size() != n) throw ValidationError("partition size does not match the network");
    std::map<std::uint32_t, std::pair<double, double>> modules;  // flow, exit
    double node_terms = 0.0;
    for (std::uint32_t u = 0; u < n; ++u) {
        auto& [flow, exit] = modules[module_of[u]];
        flow += network.flow(u);
        node_terms += plogp(network.flow(u));
        for (const auto& a : network.arcs(u)) {
            if (module_of[a.target] != module_of[u]) exit += a.flow;
        }
    }
    double total_exit = 0.0, exit_terms = 0.0, module_terms = 0.0;
    for (const auto& [m, fe] : modules) {
        total_exit += fe.second;
        exit_terms += plogp(fe.second);
        module_terms += plogp(fe.first + fe.second);
    }
    const double length = plogp(total_exit) - 2.0 * exit_terms - node_terms + module_terms;
    return std::max(0.0, length);
}

Partition optimize(const FlowNetwork& network, const SearchOptions& options) {
    const auto n = network.node_count();
    Partition best;
    best.module_of.assign(n, 0);
    best.codelength = codelength(network, best.module_of);
    if (n <= 1) return best;

    const Level base = base_level(network);
    bool have_trial = false;
    Partition trial_best;
    for (unsigned t = 0; t < std::max(1u, options.trials); ++t) {
        Rng rng(substream_seed(options.seed, t));
        auto assignment = canonical_labels(run_trial(network, base, rng));
        const double length = codelength(network, assignment);
        if (!have_trial || length < trial_best.codelength) {
            trial_best = {std::move(assignment), length};
            have_trial = true;
        }
    }
    if (trial_best.codelength < best.codelength - kMinImprovement) best = std::move(trial_best);
    return best;
}

Partition brute_force_partition(const FlowNetwork& network) {
    const auto n = network.node_count();
    if (n > 10) throw DomainError("brute-force partitioning is limited to 10 nodes");
    Partition best;
    best.module_of.assign(n, 0);
    best.codelength = codelength(network, best.module_of);
    if (n <= 1) return best;

    // restricted growth strings: a[0] = 0, a[i] <= 1 + max(a[0..i-1])
    std::vector<std::uint32_t> a(n, 0), prefix_max(n, 0);
    while (true) {
        const double length = codelength(network, a);
        if (length < best.codelength) best = {a, length};

        std::size_t i = n - 1;
        while (i > 0 && a[i] == prefix_max[i - 1] + 1) --i;
        if (i == 0) break;
        ++a[i];
        prefix_max[i] = std::max(prefix_max[i - 1], a[i]);
        for (std::size_t j = i + 1; j < n; ++j) {
            a[j] = 0;
            prefix_max[j] = prefix_max[i];
        }
    }
    best.module_of = canonical_labels(best.module_of);
    return best;
}

}  // namespace cointerest::mapeq
