#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "cointerest/error.hpp"
#include "cointerest/mrqap.hpp"
#include "cointerest/rng.hpp"

namespace cointerest::mrqap {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Fit {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::VectorXd t;
    double rss = 0.0;
    double tss = 0.0;
};

std::string column_name(const std::vector<std::string>& names, Eigen::Index col) {
    return col == 0 ? std::string("(intercept)") : names[static_cast<std::size_t>(col - 1)];
}

/// `x` already holds the intercept column first.
Fit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>& names) {
    const auto rows = x.rows(), cols = x.cols();
    if (rows < cols + 1) {
        throw ValidationError("regression needs at least " + std::to_string(cols + 1) + " dyads, got " +
                              std::to_string(rows));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < cols) {
        // each trailing pivoted column is a combination of the leading ones;
        // report it together with the columns it depends on
        const auto rank = qr.rank();
        const auto perm = qr.colsPermutation().indices();
        const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(rank, cols).template triangularView<Eigen::Upper>();
        const Eigen::MatrixXd coef =
            r.leftCols(rank).triangularView<Eigen::Upper>().solve(r.rightCols(cols - rank));
        std::set<Eigen::Index> involved;
        for (Eigen::Index k = 0; k < cols - rank; ++k) {
            involved.insert(perm(rank + k));
            for (Eigen::Index i = 0; i < rank; ++i) {
                if (std::abs(coef(i, k)) > 1e-8) involved.insert(perm(i));
            }
        }
        std::string dependent;
        for (auto col : involved) {
            if (!dependent.empty()) dependent += ", ";
            dependent += column_name(names, col);
        }
        throw ValidationError("rank-deficient design; linearly dependent column(s): " + dependent);
    }

    Fit fit;
    fit.beta = qr.solve(y);
    const Eigen::VectorXd resid = y - x * fit.beta;
    fit.rss = resid.squaredNorm();
    fit.tss = (y.array() - y.mean()).matrix().squaredNorm();

    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(cols, cols));
    const Eigen::MatrixXd unscaled = qr.colsPermutation() * (r_inv * r_inv.transpose()) *
                                     qr.colsPermutation().transpose();
    const double sigma2 = fit.rss / static_cast<double>(rows - cols);
    fit.se = (sigma2 * unscaled.diagonal().array()).sqrt();
    fit.t.resize(cols);
    for (Eigen::Index i = 0; i < cols; ++i) {
        if (fit.se(i) > 0.0) {
            fit.t(i) = fit.beta(i) / fit.se(i);
        } else {
            fit.t(i) = fit.beta(i) == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), fit.beta(i));
        }
    }
    return fit;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    return perm;
}

/// |t| of column `target` (intercept excluded, 0-based among covariates)
/// after replacing it by a permuted matrix. Rows whose permuted value is
/// undefined are skipped.
double permuted_abs_t(const DesignData& d, const Eigen::MatrixXd& permuted_source, bool permute_dependent,
                      std::size_t target, const std::vector<std::size_t>& perm,
                      const std::vector<std::string>& names) {
    const auto k = d.covariate_count();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(d.dyads.size()), static_cast<Eigen::Index>(k + 1));
    Eigen::VectorXd y(x.rows());
    Eigen::Index row = 0;
    for (std::size_t r = 0; r < d.dyads.size(); ++r) {
        const auto [a, b] = d.dyads[r];
        const double v = permuted_source(static_cast<Eigen::Index>(perm[a]), static_cast<Eigen::Index>(perm[b]));
        if (std::isnan(v)) continue;
        x(row, 0) = 1.0;
        for (std::size_t c = 0; c < k; ++c) x(row, static_cast<Eigen::Index>(c + 1)) = d.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        if (permute_dependent) {
            y(row) = v;
        } else {
            y(row) = d.y(static_cast<Eigen::Index>(r));
            x(row, static_cast<Eigen::Index>(target + 1)) = v;
        }
        ++row;
    }
    try {
        const auto fit = least_squares(x.topRows(row), y.head(row), names);
        return std::abs(fit.t(static_cast<Eigen::Index>(target + 1)));
    } catch (const ValidationError&) {
        // a degenerate replicate counts against the covariate
        return std::numeric_limits<double>::infinity();
    }
}

/// Residual of covariate `k` regressed on the intercept and the other
/// covariates, as a dense matrix over the design's nodes.
Eigen::MatrixXd residual_matrix(const DesignData& d, std::size_t k) {
    const auto cols = d.covariate_count();
    Eigen::MatrixXd others(d.x.rows(), static_cast<Eigen::Index>(cols));
    others.col(0).setOnes();
    Eigen::Index c = 1;
    for (std::size_t j = 0; j < cols; ++j) {
        if (j != k) others.col(c++) = d.x.col(static_cast<Eigen::Index>(j));
    }
    const Eigen::VectorXd target = d.x.col(static_cast<Eigen::Index>(k));
    const Eigen::VectorXd resid = target - others * others.colPivHouseholderQr().solve(target);

    const auto n = static_cast<Eigen::Index>(d.labels.size());
    Eigen::MatrixXd full = Eigen::MatrixXd::Constant(n, n, kNaN);
    for (std::size_t r = 0; r < d.dyads.size(); ++r) {
        const auto [a, b] = d.dyads[r];
        full(a, b) = full(b, a) = resid(static_cast<Eigen::Index>(r));
    }
    return full;
}

}  // namespace

DyadicMatrix::DyadicMatrix(std::vector<CountryCode> labels)
    : labels_(std::move(labels)), values_(labels_.size() * labels_.size(), kNaN) {}

void DyadicMatrix::set(std::size_t a, std::size_t b, double value) {
    if (a == b) throw DomainError("the diagonal of a dyadic matrix is undefined");
    values_[a * labels_.size() + b] = value;
    values_[b * labels_.size() + a] = value;
}

bool DyadicMatrix::defined(std::size_t a, std::size_t b) const { return a != b && !std::isnan(at(a, b)); }

DyadicMatrix DyadicMatrix::reordered(std::span<const std::size_t> order) const {
    const auto n = size();
    std::vector<CountryCode> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[order[i]] = labels_[i];
    DyadicMatrix out(std::move(labels));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (a != b) out.values_[order[a] * n + order[b]] = at(a, b);
        }
    }
    return out;
}

DyadicMatrix read_dyadic_csv(std::istream& in, const std::vector<CountryCode>& labels) {
    DyadicMatrix m(labels);
    auto index = [&](CountryCode c) -> std::optional<std::size_t> {
        auto it = std::find(labels.begin(), labels.end(), c);
        if (it == labels.end()) return std::nullopt;
        return static_cast<std::size_t>(it - labels.begin());
    };
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.starts_with('#')) continue;
        if (line_number == 1 && line.starts_with("country_a")) continue;
        std::stringstream ss(line);
        std::string a, b, v;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
            throw ParseError("expected country_a,country_b,value", line_number);
        }
        std::getline(ss, v);
        auto ca = CountryCode::try_parse(a), cb = CountryCode::try_parse(b);
        if (!ca || !cb) throw ParseError("invalid country code", line_number);
        if (*ca == *cb) throw ParseError("diagonal entry " + a + "," + b, line_number);
        auto ia = index(*ca), ib = index(*cb);
        if (!ia || !ib || v.empty() || v == "NA") continue;
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ParseError("invalid value '" + v + "'", line_number);
        }
        m.set(*ia, *ib, value);
    }
    return m;
}

DesignData vectorize_dyads(const DyadicMatrix& dep, std::span<const Covariate> covs) {
    const std::set<CountryCode> base(dep.labels().begin(), dep.labels().end());
    for (const auto& cov : covs) {
        const std::set<CountryCode> other(cov.matrix.labels().begin(), cov.matrix.labels().end());
        if (other != base) {
            std::vector<CountryCode> diff;
            std::set_symmetric_difference(base.begin(), base.end(), other.begin(), other.end(),
                                          std::back_inserter(diff));
            std::string listed;
            for (const auto& c : diff) listed += (listed.empty() ? "" : " ") + c.str();
            throw ValidationError("node sets differ between the dependent matrix and covariate '" + cov.name +
                                  "': " + listed);
        }
    }

    DesignData d;
    d.labels.assign(base.begin(), base.end());
    const auto n = d.labels.size();
    auto aligned = [&](const DyadicMatrix& m) {
        std::vector<std::size_t> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            pos[i] = static_cast<std::size_t>(std::find(m.labels().begin(), m.labels().end(), d.labels[i]) -
                                              m.labels().begin());
        }
        Eigen::MatrixXd full = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), kNaN);
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                if (a != b) full(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m.at(pos[a], pos[b]);
            }
        }
        return full;
    };
    d.dep_full = aligned(dep);
    for (const auto& cov : covs) {
        d.names.push_back(cov.name);
        d.cov_full.push_back(aligned(cov.matrix));
    }

    std::vector<double> ys;
    std::vector<std::vector<double>> xs(covs.size());
    for (std::uint32_t a = 0; a < n; ++a) {
        for (std::uint32_t b = a + 1; b < n; ++b) {
            bool ok = !std::isnan(d.dep_full(a, b));
            for (const auto& c : d.cov_full) ok = ok && !std::isnan(c(a, b));
            if (!ok) {
                ++d.dropped;
                continue;
            }
            d.dyads.emplace_back(a, b);
            ys.push_back(d.dep_full(a, b));
            for (std::size_t k = 0; k < covs.size(); ++k) xs[k].push_back(d.cov_full[k](a, b));
        }
    }
    const auto rows = static_cast<Eigen::Index>(ys.size());
    d.y = Eigen::Map<Eigen::VectorXd>(ys.data(), rows);
    d.x.resize(rows, static_cast<Eigen::Index>(covs.size()));
    for (std::size_t k = 0; k < covs.size(); ++k) d.x.col(static_cast<Eigen::Index>(k)) = Eigen::Map<Eigen::VectorXd>(xs[k].data(), rows);
    return d;
}

DesignData DesignData::leading(std::size_t count) const {
    DesignData out = *this;
    out.names.resize(count);
    out.cov_full.resize(count);
    out.x = x.leftCols(static_cast<Eigen::Index>(count));
    return out;
}

std::string to_string(Scheme scheme) { return scheme == Scheme::YPermute ? "y-permute" : "dsp"; }

Scheme parse_scheme(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "y-permute" || lower == "ypermute" || lower == "y") return Scheme::YPermute;
    if (lower == "dsp") return Scheme::DoubleSemiPartialling;
    throw UsageError("unknown permutation scheme '" + std::string(text) + "' (expected dsp or y-permute)");
}

RegressionResult ols_fit(const DesignData& design) {
    const auto k = design.covariate_count();
    const auto rows = design.y.size();
    if (static_cast<std::size_t>(rows) < k + 2) {
        throw ValidationError("regression needs at least " + std::to_string(k + 2) + " dyads, got " +
                              std::to_string(rows));
    }
    const auto fit = least_squares(with_intercept(design.x), design.y, design.names);
    if (fit.tss == 0.0) throw ValidationError("dependent variable is constant over the used dyads");

    RegressionResult res;
    res.intercept = {"(intercept)", fit.beta(0), fit.se(0), fit.t(0)};
    for (std::size_t i = 0; i < k; ++i) {
        const auto c = static_cast<Eigen::Index>(i + 1);
        res.coefficients.push_back({design.names[i], fit.beta(c), fit.se(c), fit.t(c)});
    }
    res.dyads = static_cast<std::size_t>(rows);
    res.dropped = design.dropped;
    res.df = res.dyads - k - 1;
    res.r_squared = std::clamp(1.0 - fit.rss / fit.tss, 0.0, 1.0);
    const double n = static_cast<double>(rows);
    res.adj_r_squared = 1.0 - (1.0 - res.r_squared) * (n - 1.0) / static_cast<double>(res.df);
    res.f_statistic = res.r_squared >= 1.0 ? std::numeric_limits<double>::infinity()
                                           : (res.r_squared / static_cast<double>(k)) /
                                                 ((1.0 - res.r_squared) / static_cast<double>(res.df));
    return res;
}

RegressionResult qap_test(const DesignData& design, std::size_t permutations, Scheme scheme, std::uint64_t seed,
                          unsigned threads) {
    if (permutations < 99) throw DomainError("qap_test needs at least 99 permutations");
    RegressionResult res = ols_fit(design);
    res.permutations = permutations;
    res.scheme = to_string(scheme);

    const auto k = design.covariate_count();
    const auto n = design.labels.size();
    std::vector<Eigen::MatrixXd> residuals;
    if (scheme == Scheme::DoubleSemiPartialling) {
        for (std::size_t j = 0; j < k; ++j) residuals.push_back(residual_matrix(design, j));
    }

    // exceed[j][r]: replicate r reached the observed |t| of covariate j
    std::vector<std::vector<char>> exceed(k, std::vector<char>(permutations, 0));
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            Rng rng(substream_seed(seed, r));
            const auto perm = random_permutation(n, rng);
            for (std::size_t j = 0; j < k; ++j) {
                const double observed = std::abs(res.coefficients[j].t);
                const double t = scheme == Scheme::YPermute
                                     ? permuted_abs_t(design, design.dep_full, true, j, perm, design.names)
                                     : permuted_abs_t(design, residuals[j], false, j, perm, design.names);
                exceed[j][r] = t >= observed;
            }
        }
    };

    unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, permutations));
    if (workers <= 1) {
        run(0, permutations);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (permutations + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk, end = std::min(permutations, begin + chunk);
            if (begin < end) pool.emplace_back(run, begin, end);
        }
    }

    for (std::size_t j = 0; j < k; ++j) {
        const auto hits = static_cast<double>(std::count(exceed[j].begin(), exceed[j].end(), 1));
        res.coefficients[j].p_value = (1.0 + hits) / (static_cast<double>(permutations) + 1.0);
    }
    return res;
}

std::vector<RegressionResult> nested_models(const DesignData& design, std::size_t permutations, Scheme scheme,
                                            std::uint64_t seed) {
    std::vector<RegressionResult> models;
    for (std::size_t m = 1; m <= design.covariate_count(); ++m) {
        const auto sub = design.leading(m);
        models.push_back(permutations ? qap_test(sub, permutations, scheme, seed) : ols_fit(sub));
    }
    return models;
}

namespace {

std::vector<std::string> all_terms(std::span<const RegressionResult> models) {
    std::vector<std::string> terms;
    for (const auto& m : models) {
        for (const auto& c : m.coefficients) {
            if (std::find(terms.begin(), terms.end(), c.name) == terms.end()) terms.push_back(c.name);
        }
    }
    return terms;
}

const Coefficient* find_term(const RegressionResult& m, const std::string& name) {
    for (const auto& c : m.coefficients) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

bool significant(const Coefficient& c) { return !std::isnan(c.p_value) && c.p_value < 0.01; }

}  // namespace

std::string format_table_markdown(std::span<const RegressionResult> models) {
    std::string out = "| |";
    std::string rule = "|---|";
    for (std::size_t m = 0; m < models.size(); ++m) {
        out += fmt::format(" R{} |", m);
        rule += "---:|";
    }
    out += "\n" + rule + "\n| Intercept |";
    for (const auto& m : models) out += fmt::format(" {:.4g} |", m.intercept.estimate);
    out += "\n";
    for (const auto& term : all_terms(models)) {
        out += "| " + term + " |";
        for (const auto& m : models) {
            const auto* c = find_term(m, term);
            out += c ? fmt::format(" {:.4g}{} ({:.2f}) |", c->estimate, significant(*c) ? "*" : "", c->t) : " |";
        }
        out += "\n";
    }
    out += "| Adjusted R-squared |";
    for (const auto& m : models) out += fmt::format(" {:.4f} |", m.adj_r_squared);
    out += "\n| F-statistic |";
    for (const auto& m : models) out += fmt::format(" {:.2f} |", m.f_statistic);
    out += "\n| dF |";
    for (const auto& m : models) out += fmt::format(" {} |", m.df);
    out += "\n| Dyads used |";
    for (const auto& m : models) out += fmt::format(" {} |", m.dyads);
    out += "\n| Dyads dropped |";
    for (const auto& m : models) out += fmt::format(" {} |", m.dropped);
    out += "\n";
    if (!models.empty() && models.front().permutations) {
        out += fmt::format("\nValues in parentheses are t-statistics; * marks permutation p < 0.01 ({} permutations, "
                           "{}).\n",
                           models.front().permutations, models.front().scheme);
    } else {
        out += "\nValues in parentheses are t-statistics; no permutation test was run.\n";
    }
    return out;
}

std::string format_table_csv(std::span<const RegressionResult> models) {
    std::string out = "model,term,estimate,std_error,t_statistic,p_value,adj_r_squared,f_statistic,df,dyads,dropped\n";
    for (std::size_t m = 0; m < models.size(); ++m) {
        const auto& r = models[m];
        auto row = [&](const Coefficient& c) {
            const std::string p = std::isnan(c.p_value) ? "" : fmt::format("{}", c.p_value);
            out += fmt::format("R{},{},{},{},{},{},{},{},{},{},{}\n", m, c.name, c.estimate, c.std_error, c.t, p,
                               r.adj_r_squared, r.f_statistic, r.df, r.dyads, r.dropped);
        };
        row(r.intercept);
        for (const auto& c : r.coefficients) row(c);
    }
    return out;
}

}  // namespace cointerest::mrqap
