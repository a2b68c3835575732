#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "oplace/outflow.hpp"
#include "oplace/stats.hpp"

using namespace oplace;

namespace {

double sample_mean(const SampleBatch& batch, std::size_t venue) {
    double acc = 0.0;
    for (const auto& row : batch.rows) acc += row.xi[venue];
    return acc / static_cast<double>(batch.rows.size());
}

double sample_var(const SampleBatch& batch, std::size_t venue) {
    const double mean = sample_mean(batch, venue);
    double acc = 0.0;
    for (const auto& row : batch.rows) acc += std::pow(row.xi[venue] - mean, 2);
    return acc / static_cast<double>(batch.rows.size() - 1);
}

double sample_corr(const SampleBatch& batch) {
    const double m0 = sample_mean(batch, 0);
    const double m1 = sample_mean(batch, 1);
    double c00 = 0.0;
    double c11 = 0.0;
    double c01 = 0.0;
    for (const auto& row : batch.rows) {
        c00 += std::pow(row.xi[0] - m0, 2);
        c11 += std::pow(row.xi[1] - m1, 2);
        c01 += (row.xi[0] - m0) * (row.xi[1] - m1);
    }
    return c01 / std::sqrt(c00 * c11);
}

// sup distance between the empirical cdf of a batch and the model cdf,
// probed on the model's own quantile grid
double ks_distance(const OutflowModel& model, const SampleBatch& batch, std::size_t venue) {
    std::vector<double> draws;
    draws.reserve(batch.rows.size());
    for (const auto& row : batch.rows) draws.push_back(row.xi[venue]);
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(draws.size());
    double worst = 0.0;
    for (int i = 1; i <= 99; ++i) {
        const double x = quantile(model, venue, i / 100.0);
        const auto below = static_cast<double>(
            std::upper_bound(draws.begin(), draws.end(), x) - draws.begin());
        worst = std::max(worst, std::fabs(below / n - cdf(model, venue, x)));
    }
    return worst;
}

std::filesystem::path write_temp_csv(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    out.close();
    return path;
}

}  // namespace

TEST_CASE("poisson cdf and quantile agree with the pmf-scan oracle") {
    const double lam = 2200.0;
    CHECK(poisson_cdf(2000, lam) ==
          doctest::Approx(oracle::poisson_cdf_scan(2000, lam)).epsilon(1e-9));
    CHECK(poisson_cdf(2000, lam) == doctest::Approx(7.923022072e-6).epsilon(1e-6));
    CHECK(poisson_cdf(2271, lam) ==
          doctest::Approx(oracle::poisson_cdf_scan(2271, lam)).epsilon(1e-12));
    CHECK(poisson_quantile(0.9375, lam) == 2272.0);
    CHECK(static_cast<long>(poisson_quantile(0.9375, lam)) ==
          oracle::poisson_quantile_scan(0.9375, lam));
    CHECK(static_cast<long>(poisson_quantile(0.04, lam)) ==
          oracle::poisson_quantile_scan(0.04, lam));
    CHECK(poisson_quantile(0.04, lam) == 2118.0);
    // deep tails keep relative precision through the survival function
    CHECK(poisson_sf(2000, lam) == doctest::Approx(1.0 - 7.923022072e-6));
    CHECK(poisson_cdf(1900, lam) == doctest::Approx(3.1699e-11).epsilon(1e-4));
}

TEST_CASE("closed-form cdf and quantile values") {
    const OutflowModel expo = OutflowModel::make_exponential({2200.0});
    CHECK(cdf(expo, 0, 2200.0) == doctest::Approx(1.0 - std::exp(-1.0)));
    CHECK(cdf(expo, 0, -1.0) == 0.0);
    CHECK(cdf(expo, 0, 1e9) == doctest::Approx(1.0));
    CHECK(quantile(expo, 0, 0.5) == doctest::Approx(-2200.0 * std::log(0.5)));

    const OutflowModel par = OutflowModel::make_pareto({2200.0}, 5.0);
    // scale x_m = mean*(a-1)/a = 1760
    CHECK(cdf(par, 0, 1759.9) == 0.0);
    CHECK(cdf(par, 0, 3520.0) == doctest::Approx(1.0 - std::pow(0.5, 5.0)));
    CHECK(quantile(par, 0, 1.0 - std::pow(0.5, 5.0)) == doctest::Approx(3520.0));

    const OutflowModel emp = OutflowModel::make_empirical({{100}, {200}, {300}});
    CHECK(quantile(emp, 0, 0.5) == 200.0);
    CHECK(quantile(emp, 0, 0.34) == 200.0);
    CHECK(quantile(emp, 0, 0.33) == 100.0);
    CHECK(cdf(emp, 0, 250.0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("quantile is the generalized inverse") {
    const OutflowModel pois = OutflowModel::make_poisson({300.0});
    for (double p : {0.01, 0.2, 0.5, 0.9, 0.99}) {
        const double q = quantile(pois, 0, p);
        CHECK(cdf(pois, 0, q) >= p);
        CHECK(cdf(pois, 0, q - 1e-9) < p);
    }
    const OutflowModel expo = OutflowModel::make_exponential({500.0});
    for (double p : {0.1, 0.5, 0.99}) {
        CHECK(cdf(expo, 0, quantile(expo, 0, p)) == doctest::Approx(p));
    }
    CHECK_THROWS_AS(quantile(expo, 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(quantile(expo, 0, 1.0), std::invalid_argument);
}

TEST_CASE("factor model moments and correlation") {
    const double mu = 2200.0;
    for (double alpha : {0.0, 0.4, 1.0}) {
        const OutflowModel m = OutflowModel::make_factor({mu, mu}, alpha);
        const SampleBatch batch = sample(m, 991, 60000);
        CHECK(sample_mean(batch, 0) == doctest::Approx(mu).epsilon(0.01));
        CHECK(sample_mean(batch, 1) == doctest::Approx(mu).epsilon(0.01));
        const double want_var = (alpha * alpha + (1 - alpha) * (1 - alpha)) * mu;
        CHECK(sample_var(batch, 0) == doctest::Approx(want_var).epsilon(0.05));
        if (alpha == 1.0) {
            for (const auto& row : batch.rows) CHECK(row.xi[0] == row.xi[1]);
        } else {
            const double want_corr =
                alpha * alpha / (alpha * alpha + (1 - alpha) * (1 - alpha));
            CHECK(sample_corr(batch) == doctest::Approx(want_corr).epsilon(0.08));
            if (alpha == 0.0) CHECK(std::fabs(sample_corr(batch)) < 0.02);
        }
    }
}

TEST_CASE("factor marginal cdf matches sampling") {
    const OutflowModel m = OutflowModel::make_factor({2000.0, 2400.0}, 0.6);
    const SampleBatch batch = sample(m, 12, 40000);
    for (std::size_t venue : {std::size_t{0}, std::size_t{1}}) {
        CHECK(sample_mean(batch, venue) == doctest::Approx(m.means[venue]).epsilon(0.01));
        for (double p : {0.25, 0.5, 0.9}) {
            const double x = quantile(m, venue, p);
            long below = 0;
            for (const auto& row : batch.rows) below += row.xi[venue] <= x ? 1 : 0;
            CHECK(static_cast<double>(below) / 40000.0 == doctest::Approx(p).epsilon(0.05));
        }
    }
    // marginal model carries the parent's common-factor mean
    const OutflowModel marg = venue_marginal(m, 1);
    CHECK(marg.factor_mu0 == doctest::Approx(2200.0));
    CHECK(cdf(marg, 0, 2400.0) == doctest::Approx(cdf(m, 1, 2400.0)).epsilon(1e-10));
}

TEST_CASE("empirical cdf of large batches converges to the model cdf") {
    const long n = 100000;
    const OutflowModel expo = OutflowModel::make_exponential({2200.0});
    CHECK(ks_distance(expo, sample(expo, 31, n), 0) < 0.02);
    const OutflowModel par = OutflowModel::make_pareto({2200.0}, 5.0);
    CHECK(ks_distance(par, sample(par, 32, n), 0) < 0.02);
    const OutflowModel pois = OutflowModel::make_poisson({2200.0});
    CHECK(ks_distance(pois, sample(pois, 33, n), 0) < 0.02);
    const OutflowModel fact = OutflowModel::make_factor({2200.0, 2200.0}, 0.6);
    CHECK(ks_distance(fact, sample(fact, 34, n), 0) < 0.02);
    const OutflowModel emp = OutflowModel::make_empirical({{100}, {200}, {300}});
    CHECK(ks_distance(emp, sample(emp, 35, n), 0) < 0.02);
}

TEST_CASE("empirical resampling hits stored rows uniformly") {
    const OutflowModel emp = OutflowModel::make_empirical({{100}, {200}, {300}});
    const SampleBatch batch = sample(emp, 77, 30000);
    long c100 = 0;
    long c200 = 0;
    long c300 = 0;
    for (const auto& row : batch.rows) {
        if (row.xi[0] == 100) ++c100;
        if (row.xi[0] == 200) ++c200;
        if (row.xi[0] == 300) ++c300;
    }
    CHECK(c100 + c200 + c300 == 30000);
    CHECK(static_cast<double>(c100) / 30000.0 == doctest::Approx(1.0 / 3).epsilon(0.05));
    CHECK(static_cast<double>(c300) / 30000.0 == doctest::Approx(1.0 / 3).epsilon(0.05));
}

TEST_CASE("sampling is deterministic and prefix-stable") {
    const OutflowModel m = OutflowModel::make_factor({2200.0, 2200.0}, 0.6);
    const SampleBatch a = sample(m, 4242, 500);
    const SampleBatch b = sample(m, 4242, 500);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].xi == b.rows[i].xi);
    }
    const SampleBatch longer = sample(m, 4242, 800);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].xi == longer.rows[i].xi);
    }
    const SampleBatch other = sample(m, 4243, 500);
    long diff = 0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) diff += a.rows[i].xi != other.rows[i].xi;
    CHECK(diff > 400);
}

TEST_CASE("model validation rejects bad parameters") {
    CHECK_THROWS_AS(OutflowModel::make_exponential({0.0}), std::invalid_argument);
    CHECK_THROWS_AS(OutflowModel::make_pareto({2200.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(OutflowModel::make_factor({2200.0, 2200.0}, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(OutflowModel::make_factor({100.0, 4000.0}, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(OutflowModel::make_empirical({}), std::invalid_argument);
    CHECK_THROWS_AS(sample(OutflowModel::make_poisson({10.0}), 1, 0), std::invalid_argument);
}

TEST_CASE("empirical CSV loading") {
    const auto good = write_temp_csv("oplace_good.csv",
                                     "# comment\n"
                                     "xi_1,xi_2,q_1,q_2\n"
                                     "100,150,1000,1100\n"
                                     "# another comment\n"
                                     "200,250,1200,1300\n"
                                     "300,350,1400,1500\n");
    const OutflowModel m = load_empirical(good.string(), 2);
    CHECK(m.rows.size() == 3);
    CHECK(m.feature_names == std::vector<std::string>{"q_1", "q_2"});
    CHECK(m.features[1][0] == 1200.0);
    CHECK(m.rows[2][1] == 350.0);

    const auto negative = write_temp_csv("oplace_neg.csv", "xi_1\n100\n-5\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_empirical(negative.string(), 1)),
                         doctest::Contains(":3:"), std::invalid_argument);

    const auto header_only = write_temp_csv("oplace_empty.csv", "xi_1,xi_2\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_empirical(header_only.string(), 2)),
                         doctest::Contains("no sample rows"), std::invalid_argument);

    const auto ragged = write_temp_csv("oplace_ragged.csv", "xi_1,xi_2\n100,200\n300\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_empirical(ragged.string(), 2)),
                         doctest::Contains(":3:"), std::invalid_argument);

    const auto bad_header = write_temp_csv("oplace_badh.csv", "xi_1,volume\n1,2\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_empirical(bad_header.string(), 2)),
                         doctest::Contains("xi_2"), std::invalid_argument);
}
