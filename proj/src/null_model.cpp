#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <map>

#include <boost/math/distributions/normal.hpp>

#include "cointerest/error.hpp"
#include "cointerest/null_model.hpp"
#include "cointerest/summation.hpp"

namespace cointerest {

namespace {

constexpr double kShareTolerance = 1e-12;

double z_of(std::uint64_t weight, const PairMoments& m) {
    return m.sigma > 0.0 ? (static_cast<double>(weight) - m.mean) / m.sigma : 0.0;
}

}  // namespace

CountryPair::CountryPair(CountryIndex a, CountryIndex b) : first(std::min(a, b)), second(std::max(a, b)) {
    if (a == b) throw DomainError("a country pair needs two distinct countries");
}

PairMoments pair_moments(std::uint64_t n, double p_i, double p_j) {
    if (!(p_i >= 0.0) || !(p_j >= 0.0) || p_i + p_j > 1.0 + kShareTolerance) {
        throw DomainError("invalid shares for pair moments: p_i=" + std::to_string(p_i) +
                          " p_j=" + std::to_string(p_j));
    }
    if (n < 2) return {};
    const double nn = static_cast<double>(n);
    const double pp = p_i * p_j;
    const double mean = nn * (nn - 1.0) * pp;
    const double var = mean * ((6.0 - 4.0 * nn) * pp + (nn - 2.0) * (p_i + p_j) + 1.0);
    assert(var >= -1e-9 * std::max(1.0, mean));
    return {mean, var > 0.0 ? std::sqrt(var) : 0.0};
}

PairArticleStat article_z(const ArticleEditProfile& profile, const CountryActivity& activity, CountryPair pair) {
    if (pair.second >= activity.country_count()) throw LookupError("country index out of range");
    PairArticleStat stat;
    stat.pair = pair;
    stat.weight = empirical_weight(profile.count_of(pair.first), profile.count_of(pair.second));
    const auto m = pair_moments(profile.total, activity.shares[pair.first], activity.shares[pair.second]);
    stat.mean = m.mean;
    stat.sigma = m.sigma;
    stat.z = z_of(stat.weight, m);
    return stat;
}

PairArticleStat article_z(const ArticleEditProfile& profile, const CountryActivity& activity, CountryCode a,
                          CountryCode b) {
    return article_z(profile, activity, CountryPair(activity.require_index(a), activity.require_index(b)));
}

double cumulative_z(const Corpus& corpus, CountryPair pair) {
    CompensatedSum sum;
    for (const auto& article : corpus.articles) sum += article_z(article, corpus.activity, pair).z;
    return sum.value();
}

PairZTable::PairZTable(std::size_t countries) : n_(countries), values_(countries * (countries - (countries > 0)) / 2) {}

std::size_t PairZTable::slot(CountryPair pair) const {
    assert(pair.second < n_);
    // row-major upper triangle without the diagonal
    const std::size_t i = pair.first, j = pair.second;
    return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
}

std::vector<PairZ> PairZTable::entries() const {
    std::vector<PairZ> out;
    out.reserve(values_.size());
    for (CountryIndex i = 0; i < n_; ++i) {
        for (CountryIndex j = i + 1; j < n_; ++j) {
            CountryPair p(i, j);
            out.push_back({p, at(p)});
        }
    }
    return out;
}

PairZTable cumulative_z_naive(const Corpus& corpus) {
    const auto& act = corpus.activity;
    const std::size_t n = act.country_count();
    PairZTable table(n);
    std::vector<CompensatedSum> sums(n * (n - (n > 0)) / 2);
    std::vector<std::uint64_t> dense(n, 0);

    for (const auto& article : corpus.articles) {
        for (const auto& e : article.counts) dense[e.country] = e.count;
        std::size_t slot = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j, ++slot) {
                const auto m = pair_moments(article.total, act.shares[i], act.shares[j]);
                sums[slot] += z_of(empirical_weight(dense[i], dense[j]), m);
            }
        }
        for (const auto& e : article.counts) dense[e.country] = 0;
    }

    std::size_t slot = 0;
    for (CountryIndex i = 0; i < n; ++i) {
        for (CountryIndex j = i + 1; j < n; ++j, ++slot) table.at(CountryPair(i, j)) = sums[slot].value();
    }
    return table;
}

PairZTable cumulative_z_grouped(const Corpus& corpus) {
    const auto& act = corpus.activity;
    const std::size_t n = act.country_count();
    PairZTable table(n);
    std::vector<CompensatedSum> sums(n * (n - (n > 0)) / 2);
    auto slot = [n](std::size_t i, std::size_t j) { return i * (2 * n - i - 1) / 2 + (j - i - 1); };

    std::map<std::uint64_t, std::uint64_t> size_histogram;
    for (const auto& article : corpus.articles) {
        if (article.total >= 2) ++size_histogram[article.total];
    }

    // baseline: every article contributes -mean/sigma
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            auto& sum = sums[slot(i, j)];
            for (const auto& [size, count] : size_histogram) {
                const auto m = pair_moments(size, act.shares[i], act.shares[j]);
                if (m.sigma > 0.0) sum += -static_cast<double>(count) * (m.mean / m.sigma);
            }
        }
    }

    // correction: weight/sigma where the pair co-edited
    for (const auto& article : corpus.articles) {
        if (article.total < 2) continue;
        const auto& c = article.counts;
        for (std::size_t a = 0; a < c.size(); ++a) {
            for (std::size_t b = a + 1; b < c.size(); ++b) {
                const auto i = c[a].country, j = c[b].country;
                const auto m = pair_moments(article.total, act.shares[i], act.shares[j]);
                if (m.sigma > 0.0) {
                    sums[slot(i, j)] += static_cast<double>(empirical_weight(c[a].count, c[b].count)) / m.sigma;
                }
            }
        }
    }

    for (CountryIndex i = 0; i < n; ++i) {
        for (CountryIndex j = i + 1; j < n; ++j) table.at(CountryPair(i, j)) = sums[slot(i, j)].value();
    }
    return table;
}

double significance_threshold(std::size_t country_count, std::uint64_t article_count, double alpha) {
    if (country_count < 2) throw DomainError("significance threshold needs at least 2 countries");
    if (article_count < 1) throw DomainError("significance threshold needs at least 1 article");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    const boost::math::normal_distribution<double> standard;
    const double quantile =
        boost::math::quantile(boost::math::complement(standard, alpha / static_cast<double>(country_count)));
    return quantile * std::sqrt(static_cast<double>(article_count));
}

std::vector<PairStatistic> filter_links(std::span<const PairZ> z_sums, double threshold) {
    if (!(threshold >= 0.0)) throw DomainError("threshold must be non-negative");
    std::vector<PairStatistic> links;
    for (const auto& pz : z_sums) {
        if (pz.z_sum > threshold) links.push_back({pz.pair, pz.z_sum, threshold, pz.z_sum - threshold});
    }
    std::sort(links.begin(), links.end(), [](const PairStatistic& a, const PairStatistic& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.pair < b.pair;
    });
    return links;
}

MultinomialSampler::MultinomialSampler(std::span<const double> shares) {
    if (shares.empty()) throw DomainError("sampler needs at least one category");
    double acc = 0.0;
    for (double p : shares) {
        if (!(p >= 0.0)) throw DomainError("negative share");
        acc += p;
        cdf_.push_back(acc);
    }
    if (std::abs(acc - 1.0) > 1e-9) throw DomainError("shares must sum to 1");
    cdf_.back() = 1.0;
}

void MultinomialSampler::draw(Rng& rng, std::uint64_t n, std::span<std::uint64_t> counts) const {
    assert(counts.size() == cdf_.size());
    for (std::uint64_t e = 0; e < n; ++e) {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) --it;
        ++counts[static_cast<std::size_t>(it - cdf_.begin())];
    }
}

std::vector<ArticleEditProfile> null_model_sample(const CountryActivity& activity,
                                                  std::span<const std::uint64_t> article_sizes,
                                                  std::uint64_t seed) {
    const MultinomialSampler sampler(activity.shares);
    Rng rng(seed);
    std::vector<std::uint64_t> counts(activity.country_count());
    std::vector<ArticleEditProfile> out;
    out.reserve(article_sizes.size());
    for (std::size_t a = 0; a < article_sizes.size(); ++a) {
        std::fill(counts.begin(), counts.end(), 0);
        sampler.draw(rng, article_sizes[a], counts);
        ArticleEditProfile profile;
        char id[32];
        std::snprintf(id, sizeof id, "null%09zu", a);
        profile.article_id = id;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (counts[i] > 0) profile.counts.push_back({static_cast<CountryIndex>(i), counts[i]});
        }
        profile.total = article_sizes[a];
        out.push_back(std::move(profile));
    }
    return out;
}

Corpus corpus_from_profiles(const std::vector<ArticleEditProfile>& profiles,
                            std::span<const CountryCode> countries) {
    std::map<std::string, std::map<CountryCode, std::uint64_t>> counts;
    for (const auto& p : profiles) {
        auto& per_country = counts[p.article_id];
        for (const auto& e : p.counts) per_country[countries[e.country]] += e.count;
    }
    return make_corpus(counts);
}

}  // namespace cointerest
