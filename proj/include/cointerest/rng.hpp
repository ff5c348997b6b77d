#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace cointerest {

/// Seeded generator with platform-independent derived draws.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// standard distributions are not, so uniform and bounded draws are derived
/// here directly from the raw engine output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). `bound` must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

    /// Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

/// Mixes a base seed with a stream index; used to give every replicate or
/// trial an independent, schedule-free substream.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cointerest
