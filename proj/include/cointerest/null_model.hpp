#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cointerest/corpus.hpp"
#include "cointerest/rng.hpp"

namespace cointerest {

/// Unordered pair of distinct countries, stored with first < second.
struct CountryPair {
    CountryIndex first = 0;
    CountryIndex second = 0;

    CountryPair() = default;
    /// Throws DomainError for a self-pair.
    CountryPair(CountryIndex a, CountryIndex b);
    auto operator<=>(const CountryPair&) const = default;
};

/// Co-edit weight of two countries in one article: k_i * k_j.
constexpr std::uint64_t empirical_weight(std::uint64_t k_i, std::uint64_t k_j) { return k_i * k_j; }

struct PairMoments {
    double mean = 0.0;
    double sigma = 0.0;
};

/// Mean and standard deviation of k_i * k_j when `n` edits are drawn
/// independently with country probabilities p_i, p_j:
///   mean  = n(n-1) p_i p_j
///   var   = n(n-1) p_i p_j ((6 - 4n) p_i p_j + (n - 2)(p_i + p_j) + 1)
/// Throws DomainError for negative shares or p_i + p_j > 1.
PairMoments pair_moments(std::uint64_t n, double p_i, double p_j);

struct PairArticleStat {
    CountryPair pair;
    std::uint64_t weight = 0;
    double mean = 0.0;
    double sigma = 0.0;
    /// (weight - mean) / sigma, or 0 when sigma is 0.
    double z = 0.0;
};

PairArticleStat article_z(const ArticleEditProfile& profile, const CountryActivity& activity, CountryPair pair);
/// Throws LookupError for countries absent from `activity`.
PairArticleStat article_z(const ArticleEditProfile& profile, const CountryActivity& activity, CountryCode a,
                          CountryCode b);

/// Cumulative z-score of one pair, summed over every article of the corpus in
/// article-id order. Articles the pair did not co-edit contribute -mean/sigma.
double cumulative_z(const Corpus& corpus, CountryPair pair);

struct PairZ {
    CountryPair pair;
    double z_sum = 0.0;
};

/// Cumulative z-scores for all N(N-1)/2 pairs of a corpus.
class PairZTable {
public:
    PairZTable() = default;
    explicit PairZTable(std::size_t countries);

    std::size_t country_count() const { return n_; }
    double at(CountryPair pair) const { return values_[slot(pair)]; }
    double& at(CountryPair pair) { return values_[slot(pair)]; }

    /// All pairs in (first, second) lexicographic order.
    std::vector<PairZ> entries() const;

private:
    std::size_t slot(CountryPair pair) const;
    std::size_t n_ = 0;
    std::vector<double> values_;
};

/// Reference implementation: every pair visits every article.
/// O(L * N^2) time.
PairZTable cumulative_z_naive(const Corpus& corpus);

/// Grouped implementation. The null contribution -mean/sigma of an article
/// depends only on (n_a, p_i, p_j), so it is summed once per distinct
/// article size; the remaining weight/sigma terms are added only for pairs
/// that actually co-edited an article. Agrees with cumulative_z_naive to
/// within floating-point rounding.
PairZTable cumulative_z_grouped(const Corpus& corpus);

/// Bonferroni-corrected threshold on the cumulative z-score:
/// t = Phi^-1(1 - alpha / N) * sqrt(L).
double significance_threshold(std::size_t country_count, std::uint64_t article_count, double alpha = 0.05);

struct PairStatistic {
    CountryPair pair;
    double z_sum = 0.0;
    double threshold = 0.0;
    /// z_sum - threshold; only pairs with z_sum > threshold are ever emitted.
    double weight = 0.0;
};

/// Keeps pairs whose z_sum strictly exceeds `threshold`, sorted by weight
/// descending then by pair. Throws DomainError for a negative threshold.
std::vector<PairStatistic> filter_links(std::span<const PairZ> z_sums, double threshold);

/// Draws article country labels independently from fixed shares by CDF
/// inversion.
class MultinomialSampler {
public:
    explicit MultinomialSampler(std::span<const double> shares);

    /// Adds `n` draws into `counts` (size = number of shares).
    void draw(Rng& rng, std::uint64_t n, std::span<std::uint64_t> counts) const;
    std::size_t category_count() const { return cdf_.size(); }

private:
    std::vector<double> cdf_;
};

/// Null-model corpus: article a receives sizes[a] edits, each from country i
/// with probability shares[i]. Country indices refer to `activity`; article
/// ids are zero-padded ordinals so they sort in generation order.
std::vector<ArticleEditProfile> null_model_sample(const CountryActivity& activity,
                                                  std::span<const std::uint64_t> article_sizes,
                                                  std::uint64_t seed);

/// Rebuilds a corpus (with plug-in shares) from profiles indexed against
/// `countries`.
Corpus corpus_from_profiles(const std::vector<ArticleEditProfile>& profiles,
                            std::span<const CountryCode> countries);

}  // namespace cointerest
