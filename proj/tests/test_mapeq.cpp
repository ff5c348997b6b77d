#include <doctest.h>

#include <cmath>

#include "cointerest/error.hpp"
#include "cointerest/mapeq.hpp"
#include "cointerest/rng.hpp"
#include "oracles.hpp"

using namespace cointerest;
using namespace cointerest::mapeq;

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// Map equation written out directly from module exit/visit rates.
double codelength_oracle(std::size_t n, const std::vector<WeightedEdge>& edges, const std::vector<std::uint32_t>& m) {
    double total = 0.0;
    std::vector<double> strength(n, 0.0);
    for (const auto& e : edges) {
        strength[e.u] += e.weight;
        strength[e.v] += e.weight;
        total += 2.0 * e.weight;
    }
    std::uint32_t k = 0;
    for (auto x : m) k = std::max(k, x + 1);
    std::vector<double> exit(k, 0.0), visit(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) visit[m[i]] += strength[i] / total;
    for (const auto& e : edges) {
        if (m[e.u] != m[e.v]) {
            exit[m[e.u]] += e.weight / total;
            exit[m[e.v]] += e.weight / total;
        }
    }
    double q = 0.0;
    for (double x : exit) q += x;
    double index = 0.0;
    if (q > 0.0) {
        for (double x : exit) index -= plogp(x / q);
        index *= q;
    }
    double modules = 0.0;
    for (std::uint32_t a = 0; a < k; ++a) {
        const double pm = exit[a] + visit[a];
        if (pm <= 0.0) continue;
        double h = -plogp(exit[a] / pm);
        for (std::size_t i = 0; i < n; ++i) {
            if (m[i] == a) h -= plogp(strength[i] / total / pm);
        }
        modules += pm * h;
    }
    return index + modules;
}

std::vector<WeightedEdge> planted_edges(std::size_t blocks, std::size_t per_block) {
    std::vector<WeightedEdge> edges;
    const auto n = static_cast<std::uint32_t>(blocks * per_block);
    for (std::uint32_t a = 0; a < n; ++a) {
        for (std::uint32_t b = a + 1; b < n; ++b) {
            edges.push_back({a, b, a / per_block == b / per_block ? 10.0 : 0.1});
        }
    }
    return edges;
}

}  // namespace

TEST_CASE("codelength of a uniform 4-cycle is 2 bits") {
    const std::vector<WeightedEdge> e = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 0, 1.0}};
    const FlowNetwork net(4, e);
    for (std::uint32_t i = 0; i < 4; ++i) CHECK(net.flow(i) == doctest::Approx(0.25));
    const std::vector<std::uint32_t> one(4, 0);
    CHECK(codelength(net, one) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("disconnected cliques") {
    std::vector<WeightedEdge> e;
    for (std::uint32_t off : {0u, 4u}) {
        for (std::uint32_t a = 0; a < 4; ++a) {
            for (std::uint32_t b = a + 1; b < 4; ++b) e.push_back({off + a, off + b, 1.0});
        }
    }
    const FlowNetwork net(8, e);
    const std::vector<std::uint32_t> split = {0, 0, 0, 0, 1, 1, 1, 1};
    // q = 0; each module is half the flow with 2 bits of node entropy
    CHECK(codelength(net, split) == doctest::Approx(0.5 * 2.0 + 0.5 * 2.0));
    const std::vector<std::uint32_t> merged(8, 0);
    CHECK(codelength(net, merged) > codelength(net, split));

    const auto best = optimize(net);
    CHECK(best.module_of == split);
    CHECK(brute_force_partition(net).module_of == split);
}

TEST_CASE("codelength matches a direct oracle on random partitions") {
    Rng rng(5);
    for (const auto& sn : oracle::small_networks()) {
        const FlowNetwork net(sn.nodes, sn.edges);
        for (int t = 0; t < 10; ++t) {
            std::vector<std::uint32_t> m(sn.nodes);
            for (auto& x : m) x = static_cast<std::uint32_t>(rng.below(4));
            const auto canon = canonical_labels(m);
            CHECK(codelength(net, canon) == doctest::Approx(codelength_oracle(sn.nodes, sn.edges, canon)).epsilon(1e-10));
        }
    }
}

TEST_CASE("optimize equals brute force on small networks") {
    for (const auto& sn : oracle::small_networks()) {
        CAPTURE(sn.name);
        const FlowNetwork net(sn.nodes, sn.edges);
        const auto opt = optimize(net);
        const auto brute = brute_force_partition(net);
        CHECK(std::abs(opt.codelength - brute.codelength) <= 1e-9);
        CHECK(opt.codelength == doctest::Approx(codelength(net, opt.module_of)).epsilon(1e-12));
    }
}

TEST_CASE("optimize invariants") {
    Rng rng(77);
    for (int g = 0; g < 20; ++g) {
        const std::size_t n = 10 + rng.below(30);
        std::vector<WeightedEdge> e;
        for (std::uint32_t a = 0; a < n; ++a) {
            for (std::uint32_t b = a + 1; b < n; ++b) {
                if (rng.uniform() < 0.2) e.push_back({a, b, 0.5 + rng.uniform() * 5.0});
            }
        }
        const FlowNetwork net(n, e);
        const auto best = optimize(net, {.seed = 3, .trials = 4});
        std::vector<std::uint32_t> single(n, 0), singletons(n);
        for (std::uint32_t i = 0; i < n; ++i) singletons[i] = i;
        CHECK(best.codelength <= codelength(net, single) + 1e-12);
        CHECK(best.codelength <= codelength(net, singletons) + 1e-12);
        CHECK(best.codelength >= 0.0);
        CHECK(best.module_of == canonical_labels(best.module_of));
        CHECK(optimize(net, {.seed = 3, .trials = 4}).module_of == best.module_of);
    }
}

TEST_CASE("planted blocks are recovered for every seed") {
    const auto edges = planted_edges(3, 5);
    const FlowNetwork net(15, edges);
    std::vector<std::uint32_t> planted(15);
    for (std::uint32_t i = 0; i < 15; ++i) planted[i] = i / 5;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto p = optimize(net, {.seed = seed, .trials = 10});
        CHECK(p.module_of == planted);
        CHECK(p.codelength <= codelength(net, planted) + 1e-12);
    }
}

TEST_CASE("codelength is invariant under rescaling") {
    for (const auto& sn : oracle::small_networks()) {
        auto scaled = sn.edges;
        for (auto& e : scaled) e.weight *= 37.5;
        const FlowNetwork a(sn.nodes, sn.edges), b(sn.nodes, scaled);
        std::vector<std::uint32_t> m(sn.nodes);
        for (std::uint32_t i = 0; i < sn.nodes; ++i) m[i] = i % 3;
        CHECK(codelength(a, m) == doctest::Approx(codelength(b, m)).epsilon(1e-12));
    }
}

TEST_CASE("degenerate inputs") {
    const FlowNetwork single(1, {});
    const auto p = optimize(single);
    CHECK(p.module_of == std::vector<std::uint32_t>{0});
    CHECK(p.codelength == 0.0);
    CHECK(brute_force_partition(single).module_of == std::vector<std::uint32_t>{0});
    CHECK(single.warnings().size() == 1);

    const std::vector<WeightedEdge> pair = {{0, 1, 1.0}};
    const FlowNetwork two(2, pair);
    const auto brute = brute_force_partition(two);
    const double one_mod = codelength(two, std::vector<std::uint32_t>{0, 0});
    const double two_mod = codelength(two, std::vector<std::uint32_t>{0, 1});
    CHECK(brute.codelength == doctest::Approx(std::min(one_mod, two_mod)));

    const FlowNetwork eleven(11, {});
    CHECK_THROWS_AS(brute_force_partition(eleven), DomainError);

    const std::vector<WeightedEdge> loop = {{0, 0, 1.0}};
    CHECK_THROWS_AS(FlowNetwork(2, loop), ValidationError);
    const std::vector<WeightedEdge> out = {{0, 5, 1.0}};
    CHECK_THROWS_AS(FlowNetwork(2, out), ValidationError);
    const std::vector<WeightedEdge> neg = {{0, 1, -1.0}};
    CHECK_THROWS_AS(FlowNetwork(2, neg), ValidationError);
    CHECK_THROWS_AS(codelength(two, std::vector<std::uint32_t>{0}), ValidationError);

    CHECK(canonical_labels(std::vector<std::uint32_t>{5, 2, 5, 9}) == std::vector<std::uint32_t>{0, 1, 0, 2});
}
