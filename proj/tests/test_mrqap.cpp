#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cointerest/error.hpp"
#include "cointerest/mrqap.hpp"
#include "cointerest/rng.hpp"
#include "cointerest/synth.hpp"
#include "oracles.hpp"

using namespace cointerest;
using namespace cointerest::mrqap;

namespace {

std::vector<CountryCode> labels(std::size_t n) { return synth::country_codes(n); }

DyadicMatrix filled(std::size_t n, auto f) {
    DyadicMatrix m(labels(n));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) m.set(a, b, f(a, b));
    }
    return m;
}

}  // namespace

TEST_CASE("DyadicMatrix basics") {
    DyadicMatrix m(labels(3));
    CHECK_FALSE(m.defined(0, 1));
    m.set(0, 1, 2.5);
    CHECK(m.at(1, 0) == 2.5);
    CHECK(m.defined(1, 0));
    CHECK_THROWS_AS(m.set(1, 1, 1.0), DomainError);
    CHECK_FALSE(m.defined(2, 2));

    std::istringstream csv("country_a,country_b,value\nAA,AB,1.5\nAB,AC,NA\nAA,ZZ,9\nAC,AA,\n");
    const auto r = read_dyadic_csv(csv, labels(3));
    CHECK(r.at(0, 1) == 1.5);
    CHECK_FALSE(r.defined(1, 2));
    CHECK_FALSE(r.defined(0, 2));
}

TEST_CASE("vectorize_dyads") {
    const auto dep = filled(4, [](auto a, auto b) { return double(a + b); });
    const std::vector<Covariate> covs = {{"x", filled(4, [](auto a, auto b) { return double(a * b); })}};
    const auto d = vectorize_dyads(dep, covs);
    CHECK(d.y.size() == 6);
    CHECK(d.dropped == 0);

    auto masked = covs;
    masked[0].matrix = DyadicMatrix(labels(4));
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = a + 1; b < 4; ++b) {
            if (!(a == 1 && b == 2)) masked[0].matrix.set(a, b, double(a * b));
        }
    }
    const auto d5 = vectorize_dyads(dep, masked);
    CHECK(d5.y.size() == 5);
    CHECK(d5.dropped == 1);

    DyadicMatrix other(std::vector<CountryCode>{CountryCode::parse("XA"), CountryCode::parse("XB")});
    other.set(0, 1, 1.0);
    const std::vector<Covariate> bad = {{"x", other}};
    try {
        vectorize_dyads(dep, bad);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        CHECK(what.find("AA") != std::string::npos);
        CHECK(what.find("XB") != std::string::npos);
    }
}

TEST_CASE("ols perfect fit") {
    const auto x = filled(6, [](auto a, auto b) { return double(a * 3 + b * b); });
    const auto y = filled(6, [&](auto a, auto b) { return 2.0 * x.at(a, b) + 1.0; });
    const std::vector<Covariate> covs = {{"x", x}};
    const auto r = ols_fit(vectorize_dyads(y, covs));
    CHECK(r.coefficients[0].estimate == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.intercept.estimate == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.r_squared == doctest::Approx(1.0));
    CHECK(r.df == 15 - 2);
}

TEST_CASE("ols matches the normal-equations oracle") {
    const std::vector<double> y4 = {1.0, 2.5, -0.3, 4.0, 0.7, 2.2};
    const std::vector<std::vector<double>> x4 = {{0.1, 1.0}, {0.4, 0.0}, {-0.2, 1.0}, {1.3, 0.0}, {0.9, 1.0}, {0.5, 1.0}};
    DyadicMatrix dep(labels(4)), c1(labels(4)), c2(labels(4));
    std::size_t row = 0;
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = a + 1; b < 4; ++b, ++row) {
            dep.set(a, b, y4[row]);
            c1.set(a, b, x4[row][0]);
            c2.set(a, b, x4[row][1]);
        }
    }
    const std::vector<Covariate> covs = {{"c1", c1}, {"c2", c2}};
    const auto r = ols_fit(vectorize_dyads(dep, covs));
    const auto beta = oracle::normal_equations(x4, y4);
    CHECK(std::abs(r.intercept.estimate - beta[0]) < 1e-10);
    CHECK(std::abs(r.coefficients[0].estimate - beta[1]) < 1e-10);
    CHECK(std::abs(r.coefficients[1].estimate - beta[2]) < 1e-10);
    CHECK(r.df == 3);
    CHECK(r.adj_r_squared <= r.r_squared);

    // larger random design
    const auto covs20 = synth::covariates(labels(20), std::vector<std::uint32_t>(20, 0), 4);
    const auto dep20 = synth::random_dyadic(labels(20), 9);
    const auto d = vectorize_dyads(dep20, covs20);
    const auto fit = ols_fit(d);
    std::vector<std::vector<double>> xs(d.y.size());
    std::vector<double> ys(d.y.size());
    for (Eigen::Index i = 0; i < d.y.size(); ++i) {
        ys[i] = d.y[i];
        for (Eigen::Index j = 0; j < d.x.cols(); ++j) xs[i].push_back(d.x(i, j));
    }
    const auto b = oracle::normal_equations(xs, ys);
    CHECK(std::abs(fit.intercept.estimate - b[0]) < 1e-9);
    for (std::size_t j = 0; j < fit.coefficients.size(); ++j) {
        CHECK(std::abs(fit.coefficients[j].estimate - b[j + 1]) < 1e-9);
    }
}

TEST_CASE("ols on noise is near zero") {
    const auto y = synth::random_dyadic(labels(25), 1);
    const std::vector<Covariate> covs = {{"x", synth::random_dyadic(labels(25), 2)}};
    const auto r = ols_fit(vectorize_dyads(y, covs));
    CHECK(std::abs(r.coefficients[0].estimate) < 3.0 * r.coefficients[0].std_error);
}

TEST_CASE("ols errors") {
    const auto x = filled(5, [](auto a, auto b) { return double(a + b); });
    const std::vector<Covariate> collinear = {{"x", x}, {"twice_x", filled(5, [&](auto a, auto b) { return 2.0 * x.at(a, b); })}};
    try {
        ols_fit(vectorize_dyads(synth::random_dyadic(labels(5), 3), collinear));
        FAIL("expected rank deficiency");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("twice_x") != std::string::npos);
    }
    const std::vector<Covariate> one = {{"x", x}};
    CHECK_THROWS_AS(ols_fit(vectorize_dyads(filled(5, [](auto, auto) { return 3.0; }), one)), ValidationError);
    CHECK_THROWS_AS(ols_fit(vectorize_dyads(filled(2, [](auto, auto) { return 3.0; }),
                                            std::vector<Covariate>{{"x", filled(2, [](auto, auto) { return 1.0; })}})),
                    ValidationError);
}

TEST_CASE("qap perfect fit hits the minimum p-value") {
    const auto x = synth::random_dyadic(labels(10), 5);
    const auto y = filled(10, [&](auto a, auto b) { return 2.0 * x.at(a, b); });
    const std::vector<Covariate> covs = {{"x", x}};
    const auto d = vectorize_dyads(y, covs);
    for (auto scheme : {Scheme::YPermute, Scheme::DoubleSemiPartialling}) {
        const auto r = qap_test(d, 999, scheme, 1);
        CHECK(r.coefficients[0].p_value == doctest::Approx(1.0 / 1000.0));
        CHECK(r.permutations == 999);
    }
    CHECK_THROWS_AS(qap_test(d, 98, Scheme::YPermute, 1), DomainError);
}

TEST_CASE("qap is deterministic and relabeling invariant") {
    const auto labs = labels(12);
    const auto covs = synth::covariates(labs, std::vector<std::uint32_t>{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2}, 3);
    const double coef[] = {0.9, 2.7, -0.4, 0.3, 0.2};
    const auto dep = synth::linear_dependent(covs, 0.5, coef, 1.0, 8);
    const auto d = vectorize_dyads(dep, covs);

    for (auto scheme : {Scheme::YPermute, Scheme::DoubleSemiPartialling}) {
        const auto r1 = qap_test(d, 199, scheme, 42);
        const auto r2 = qap_test(d, 199, scheme, 42, 1);
        for (std::size_t k = 0; k < r1.coefficients.size(); ++k) {
            CHECK(r1.coefficients[k].p_value == r2.coefficients[k].p_value);
            CHECK(r1.coefficients[k].p_value > 0.0);
            CHECK(r1.coefficients[k].p_value <= 1.0);
        }

        // same permutation on every matrix
        std::vector<std::size_t> order = {5, 3, 11, 0, 7, 1, 9, 2, 10, 4, 8, 6};
        std::vector<Covariate> moved;
        for (const auto& c : covs) moved.push_back({c.name, c.matrix.reordered(order)});
        const auto r3 = qap_test(vectorize_dyads(dep.reordered(order), moved), 199, scheme, 42);
        CHECK(r3.intercept.estimate == doctest::Approx(r1.intercept.estimate).epsilon(1e-12));
        for (std::size_t k = 0; k < r1.coefficients.size(); ++k) {
            CHECK(r3.coefficients[k].estimate == doctest::Approx(r1.coefficients[k].estimate).epsilon(1e-12));
            CHECK(r3.coefficients[k].t == doctest::Approx(r1.coefficients[k].t).epsilon(1e-12));
            CHECK(r3.coefficients[k].p_value == r1.coefficients[k].p_value);
        }
    }
}

TEST_CASE("nested models") {
    const auto labs = labels(15);
    const auto covs = synth::covariates(labs, std::vector<std::uint32_t>(15, 0), 6);
    const double coef[] = {0.9, 2.7, -0.4, 0.3, 0.2};
    const auto dep = synth::linear_dependent(covs, 0.0, coef, 0.5, 2);
    const auto d = vectorize_dyads(dep, covs);

    const auto two = nested_models(d.leading(2), 0, Scheme::DoubleSemiPartialling, 1);
    CHECK(two.size() == 2);
    CHECK(two[0].coefficients.size() == 1);
    CHECK(two[1].coefficients.size() == 2);

    const auto all = nested_models(d, 0, Scheme::DoubleSemiPartialling, 1);
    REQUIRE(all.size() == 5);
    for (std::size_t m = 1; m < all.size(); ++m) CHECK(all[m].r_squared >= all[m - 1].r_squared - 1e-12);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(std::abs(all[4].coefficients[k].estimate - coef[k]) < 4.0 * all[4].coefficients[k].std_error);
    }

    const auto md = format_table_markdown(all);
    CHECK(md.find("R0") != std::string::npos);
    CHECK(md.find("R4") != std::string::npos);
    CHECK(md.find("Adjusted R-squared") != std::string::npos);
    CHECK(md.find("dF") != std::string::npos);
    const auto csv = format_table_csv(all);
    CHECK(csv.rfind("model,term,estimate", 0) == 0);
}

TEST_CASE("scheme names") {
    CHECK(parse_scheme("DSP") == Scheme::DoubleSemiPartialling);
    CHECK(parse_scheme("y-permute") == Scheme::YPermute);
    CHECK(to_string(Scheme::YPermute) == "y-permute");
    CHECK_THROWS_AS(parse_scheme("bogus"), UsageError);
}
