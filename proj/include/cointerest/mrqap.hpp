#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cointerest/corpus.hpp"

namespace cointerest::mrqap {

/// Symmetric country-by-country matrix. Undefined dyads (and the diagonal)
/// are NaN.
class DyadicMatrix {
public:
    DyadicMatrix() = default;
    explicit DyadicMatrix(std::vector<CountryCode> labels);

    std::span<const CountryCode> labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }

    /// Sets both (a, b) and (b, a). Throws DomainError on the diagonal.
    void set(std::size_t a, std::size_t b, double value);
    double at(std::size_t a, std::size_t b) const { return values_[a * labels_.size() + b]; }
    bool defined(std::size_t a, std::size_t b) const;

    /// The same data with node i moved to position order[i] (labels travel
    /// with their rows and columns).
    DyadicMatrix reordered(std::span<const std::size_t> order) const;

private:
    std::vector<CountryCode> labels_;
    std::vector<double> values_;
};

/// Reads `country_a,country_b,value` rows (optional header). Nodes are
/// `labels`; rows naming other countries are ignored. Empty or `NA` values
/// stay undefined.
DyadicMatrix read_dyadic_csv(std::istream& in, const std::vector<CountryCode>& labels);

struct Covariate {
    std::string name;
    DyadicMatrix matrix;
};

/// Regression rows for the upper triangle, nodes in code order. Dense
/// copies of the aligned matrices are kept for permutation.
struct DesignData {
    std::vector<CountryCode> labels;
    std::vector<std::string> names;  // covariate names
    std::vector<std::pair<std::uint32_t, std::uint32_t>> dyads;
    Eigen::VectorXd y;
    Eigen::MatrixXd x;  // one column per covariate, no intercept
    std::size_t dropped = 0;

    Eigen::MatrixXd dep_full;               // n x n, NaN where undefined
    std::vector<Eigen::MatrixXd> cov_full;  // same shape

    std::size_t covariate_count() const { return names.size(); }
    /// Design restricted to the first `count` covariates (same rows).
    DesignData leading(std::size_t count) const;
};

/// A dyad is used iff the dependent and every covariate are defined there.
/// Throws ValidationError listing the symmetric difference when node sets
/// differ.
DesignData vectorize_dyads(const DyadicMatrix& dep, std::span<const Covariate> covs);

enum class Scheme { YPermute, DoubleSemiPartialling };
std::string to_string(Scheme scheme);
/// Accepts "y-permute" and "dsp" (case-insensitive). Throws UsageError.
Scheme parse_scheme(std::string_view text);

struct Coefficient {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double t = 0.0;
    /// Permutation p-value; NaN until qap_test fills it (never for the
    /// intercept).
    double p_value = std::numeric_limits<double>::quiet_NaN();
};

struct RegressionResult {
    Coefficient intercept;
    std::vector<Coefficient> coefficients;
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double f_statistic = 0.0;
    std::size_t df = 0;  // residual degrees of freedom: dyads - covariates - 1
    std::size_t dyads = 0;
    std::size_t dropped = 0;
    std::size_t permutations = 0;
    std::string scheme;  // empty for a plain fit
};

/// Least squares with intercept via column-pivoted QR and classical
/// t-statistics. Throws ValidationError for too few rows, a constant
/// dependent variable, or a rank-deficient design (naming the columns).
RegressionResult ols_fit(const DesignData& design);

/// ols_fit plus permutation p-values
///   p = (1 + #{replicates with |t| >= observed |t|}) / (permutations + 1).
/// YPermute relabels the dependent matrix; DoubleSemiPartialling permutes
/// each covariate's residual after regressing it on the others. Replicate r
/// uses its own seeded substream. Throws DomainError for < 99 permutations.
RegressionResult qap_test(const DesignData& design, std::size_t permutations, Scheme scheme, std::uint64_t seed,
                          unsigned threads = 0);

/// Models R0..R(k-1); model m uses the first m+1 covariates on the shared
/// rows of `design`. With permutations == 0 only ols_fit is run.
std::vector<RegressionResult> nested_models(const DesignData& design, std::size_t permutations, Scheme scheme,
                                            std::uint64_t seed);

/// Table with coefficients, t-statistics in parentheses and `*` for
/// p < 0.01, followed by adjusted R-squared, F-statistic and dF rows.
std::string format_table_markdown(std::span<const RegressionResult> models);
std::string format_table_csv(std::span<const RegressionResult> models);

}  // namespace cointerest::mrqap
