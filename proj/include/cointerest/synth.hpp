#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cointerest/corpus.hpp"
#include "cointerest/mrqap.hpp"

namespace cointerest::synth {

/// Four short articles edited from four countries, with repeats.
std::vector<EditRecord> toy_edits();

/// Synthetic country codes "AA", "AB", ... in ascending order.
std::vector<CountryCode> country_codes(std::size_t count);

struct PlantedSpec {
    std::size_t blocks = 3;
    std::size_t countries_per_block = 5;
    std::size_t articles = 4000;
    /// Fraction of articles edited mostly from one block.
    double local_fraction = 0.6;
    /// Weight multiplier of home-block countries in a local article.
    double intra_boost = 10.0;
    std::uint64_t min_edits = 2;
    std::uint64_t max_edits = 12;
};

struct PlantedCorpus {
    std::vector<EditRecord> edits;
    std::vector<CountryCode> countries;
    std::vector<std::uint32_t> block_of;  // per country
};

/// Articles are either global (countries drawn by base share) or local to a
/// home block (home countries weighted by intra_boost).
PlantedCorpus planted_corpus(const PlantedSpec& spec, std::uint64_t seed);

/// Corpus drawn from the null model itself: `countries` countries with
/// Zipf-like shares, article sizes uniform in [min_edits, max_edits].
Corpus null_corpus(std::size_t articles, std::size_t countries, std::uint64_t seed, std::uint64_t min_edits = 2,
                   std::uint64_t max_edits = 20);

/// Covariates in the order of the regression table: shared_language,
/// shared_religion, log_distance, colonial_tie, log_trade. Nodes in
/// `block_of` blocks share language with higher probability.
std::vector<mrqap::Covariate> covariates(std::span<const CountryCode> labels, std::span<const std::uint32_t> block_of,
                                         std::uint64_t seed);

/// Dependent matrix intercept + sum_k coefficients[k] * covs[k] + noise_sd * N(0,1).
mrqap::DyadicMatrix linear_dependent(std::span<const mrqap::Covariate> covs, double intercept,
                                     std::span<const double> coefficients, double noise_sd, std::uint64_t seed);

/// Independent N(0,1) entries on every dyad.
mrqap::DyadicMatrix random_dyadic(std::span<const CountryCode> labels, std::uint64_t seed);

void write_edit_log(std::ostream& out, std::span<const EditRecord> edits);
void write_dyadic_csv(std::ostream& out, const mrqap::DyadicMatrix& matrix);
/// FeatureCollection with one unit square per country, property iso_a2.
void write_square_geometry(std::ostream& out, std::span<const CountryCode> countries);

}  // namespace cointerest::synth
