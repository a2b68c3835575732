#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oplace/analytic.hpp"
#include "oplace/errors.hpp"
#include "oplace/experiments.hpp"
#include "oplace/rng.hpp"
#include "oplace/verify.hpp"

using namespace oplace;

TEST_CASE("overfill predicate is the exact characterization of A > S") {
    const MarketSpec spec = fixtures::standard_spec(2);
    std::mt19937 gen(1009);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Rng flows(55);
    long mismatches = 0;
    long overfills = 0;
    for (int trial = 0; trial < 20000; ++trial) {
        // X strictly inside C
        const double s = spec.target_S;
        const double m = unif(gen) * s * 0.98 + 0.01 * s;
        const double l1_hi = s - m;
        const double l1 = unif(gen) * l1_hi * 0.98 + 0.01 * l1_hi;
        const double l2_lo = std::max(0.0, s - m - l1);
        const double l2 = l2_lo + (l1_hi - l2_lo) * (0.02 + 0.96 * unif(gen));
        const Allocation x{m, {l1, l2}};
        if (!feasible_set_contains(x, spec) || m + l1 + l2 <= s) continue;

        OutflowSample xi{{0.0, 0.0}};
        if (trial % 2 == 0) {
            xi.xi[0] = flows.exponential(2500.0);
            xi.xi[1] = flows.exponential(2500.0);
        } else {
            xi.xi[0] = flows.poisson(2400.0);
            xi.xi[1] = flows.poisson(2400.0);
        }
        const bool over = total_filled(x, xi, spec) > spec.target_S;
        overfills += over ? 1 : 0;
        if (over != overfill_predicate_two(x, xi, spec)) ++mismatches;
    }
    CHECK(mismatches == 0);
    CHECK(overfills > 500);  // the test actually exercises both branches

    const Allocation x{200, {700, 500}};
    CHECK_FALSE(overfill_predicate_two(x, {{0.0, 0.0}}, spec));
    CHECK(overfill_predicate_two(x, {{1e7, 1e7}}, spec));
    CHECK_THROWS_AS(overfill_predicate_two({200, {800}}, {{1.0, 2.0}},
                                           fixtures::standard_spec(1)),
                    std::invalid_argument);
}

TEST_CASE("kkt targets are computed from the spec prices") {
    const MarketSpec spec = fixtures::standard_spec(2);
    const OutflowModel model = OutflowModel::make_poisson({2200.0, 2200.0});
    const KKTReport rep = estimate_kkt({400, {485, 385}}, spec, model, 2000, 31);
    CHECK(rep.target_shortfall == doctest::Approx(0.94));
    CHECK(rep.target_conditional[0] == doctest::Approx(0.04));
    CHECK(rep.target_conditional[1] == doctest::Approx(0.04));
}

TEST_CASE("kkt residuals pass at a verified interior optimum") {
    // the two-exchange solution with an interior optimum satisfies the
    // first-order conditions; every residual sits within 3 binomial SE
    const MarketSpec spec = fixtures::interior_two_venue_spec();
    const OutflowModel expo = OutflowModel::make_exponential({700.0, 700.0});
    const TwoExchangeSolution sol = solve_two(spec, expo);
    const Allocation x{sol.M_star, {sol.L1_star, sol.L2_star}};
    const KKTReport rep = estimate_kkt(x, spec, expo, 200000, 17);

    CHECK(rep.target_shortfall == doctest::Approx((230.0 + 800.0) / 1600.0));
    CHECK(rep.shortfall_residual <= 3.0 * rep.shortfall_se);
    for (std::size_t j = 0; j < 2; ++j) {
        REQUIRE(rep.conditional_defined[j]);
        CHECK_FALSE(rep.conditional_low_confidence[j]);
        CHECK(rep.conditional_residual[j] <= 3.0 * rep.conditional_se[j]);
    }
    CHECK(rep.warnings.empty());
}

TEST_CASE("kkt conditions and notes") {
    const MarketSpec spec = fixtures::standard_spec(2);
    const OutflowModel model = OutflowModel::make_poisson({2200.0, 2200.0});

    // L_j = 0 with condition (9) satisfied cannot be optimal: exponential
    // outflows leave p_j = F_other(Q_other) ~ 0.6, far above the 0.04 target
    MarketSpec spec_e = spec;
    spec_e.queues_Q = {1900.0, 2000.0};
    const OutflowModel expo = OutflowModel::make_exponential({2200.0, 2200.0});
    const KKTReport rep = estimate_kkt({1000, {0, 0}}, spec_e, expo, 5000, 3);
    CHECK(rep.condition9_holds[0]);
    bool has_note = false;
    for (const auto& n : rep.notes) has_note = has_note || n.find("L_j = 0") != std::string::npos;
    CHECK(has_note);

    // no conditioning events: flagged undefined, not fabricated
    MarketSpec deep = spec;
    deep.queues_Q = {100000.0, 100000.0};
    const KKTReport rep2 = estimate_kkt({1000, {0, 0}}, deep, model, 2000, 4);
    CHECK_FALSE(rep2.conditional_defined[0]);
    CHECK(std::isnan(rep2.conditional_shortfall_hat[0]));

    // allocation outside C draws a warning
    const KKTReport rep3 = estimate_kkt({0, {10, 10}}, spec, model, 1000, 5);
    CHECK_FALSE(rep3.warnings.empty());

    CHECK_THROWS_AS(estimate_kkt({1000, {0, 0}}, spec, model, 100, 6), std::invalid_argument);
}

TEST_CASE("prop-4 hypothesis checks") {
    const MarketSpec spec = fixtures::standard_spec(2);
    MarketSpec spec42 = spec;
    spec42.queues_Q = {1900.0, 2000.0};
    const OutflowModel pois = OutflowModel::make_poisson({2200.0, 2200.0});
    CHECK(check_prop4_preconditions(spec42, pois).empty());

    // bounded empirical support: F_k(Q_k + S) = 1
    const OutflowModel emp =
        OutflowModel::make_empirical({{2100.0, 2100.0}, {2150.0, 2150.0}});
    MarketSpec small = spec;
    small.queues_Q = {1500.0, 1500.0};
    const auto v = check_prop4_preconditions(small, emp);
    CHECK_FALSE(v.empty());

    // lambda_u at or above the all-market threshold on every venue; the
    // exponential queues keep the threshold finite (~558 mills)
    MarketSpec urgent = spec42;
    urgent.lambda_u = 1000.0;
    urgent.lambda_o = 1100.0;
    const OutflowModel expo = OutflowModel::make_exponential({2200.0, 2200.0});
    const auto v2 = check_prop4_preconditions(urgent, expo);
    bool has_lambda = false;
    for (const auto& s : v2) has_lambda = has_lambda || s.find("lambda_u") != std::string::npos;
    CHECK(has_lambda);
}

TEST_CASE("brute force agrees with the closed form on one venue") {
    const MarketSpec spec = fixtures::standard_spec(1);
    const OutflowModel pois = OutflowModel::make_poisson({2200.0});
    const BruteForceReport rep = brute_force_solve(spec, pois, 8.0, 20000, 71);
    CHECK(std::fabs(rep.minimizer.market_M - 728.0) <= 8.0);
    CHECK(std::fabs(rep.minimizer.limits_L[0] - 272.0) <= 8.0);
    CHECK(rep.warnings.empty());
    CHECK(rep.lattice_points >= 126);

    MarketSpec limp = spec;
    limp.lambda_u = 100.0;  // all-limit regime
    const BruteForceReport rep2 = brute_force_solve(limp, pois, 50.0, 5000, 72);
    CHECK(rep2.minimizer.market_M == 0.0);
    CHECK(rep2.minimizer.limits_L[0] == 1000.0);

    const BruteForceReport coarse = brute_force_solve(spec, pois, 600.0, 1000, 73);
    CHECK_FALSE(coarse.warnings.empty());
}

TEST_CASE("brute force matches the two-exchange interior root") {
    const MarketSpec spec = fixtures::interior_two_venue_spec();
    const OutflowModel expo = OutflowModel::make_exponential({700.0, 700.0});
    const TwoExchangeSolution sol = solve_two(spec, expo);
    const BruteForceReport rep = brute_force_solve(spec, expo, 25.0, 40000, 74);
    CHECK(std::fabs(rep.minimizer.market_M - sol.M_star) <= 25.0);
    CHECK(std::fabs(rep.minimizer.limits_L[0] - sol.L1_star) <= 25.0);
    CHECK(std::fabs(rep.minimizer.limits_L[1] - sol.L2_star) <= 25.0);

    // objective at the root is within lattice resolution + noise of the
    // lattice minimum on the same batch
    std::vector<OutflowSample> rows(40000);
    for (long i = 0; i < 40000; ++i) {
        expo.draw_row(74, streams::kBrute, i, rows[static_cast<std::size_t>(i)].xi);
    }
    const BatchEval diff = paired_difference({sol.M_star, {sol.L1_star, sol.L2_star}},
                                             rep.minimizer, spec, rows);
    const double lipschitz = spec.lambda_u + spec.lambda_o + 2.0 * spec.half_spread_h + 100.0;
    CHECK(std::fabs(diff.mean) <= lipschitz * 25.0 + 3.0 * diff.se);
}

TEST_CASE("brute force on three venues stays inside C") {
    MarketSpec spec = fixtures::standard_spec(3);
    spec.queues_Q = {1900.0, 2000.0, 2100.0};
    const OutflowModel model = OutflowModel::make_poisson({2200.0, 2200.0, 2200.0});
    const BruteForceReport rep = brute_force_solve(spec, model, 250.0, 800, 75);
    CHECK(feasible_set_contains(rep.minimizer, spec));
    CHECK_THROWS_AS(
        brute_force_solve(fixtures::standard_spec(4),
                          OutflowModel::make_poisson({2200.0, 2200.0, 2200.0, 2200.0}), 500.0,
                          100, 76),
        std::invalid_argument);
}

TEST_CASE("dual search prices vacuous constraints at the boundary") {
    const MarketSpec spec = fixtures::standard_spec(1);
    const OutflowModel pois = OutflowModel::make_poisson({2200.0});
    SAConfig inner;
    inner.iterations_N = 300;
    inner.initial_X0 = benchmark_allocations(spec).X_E;
    inner.seed = 21;
    inner.eval_count = 1500;
    const DualReport rep = solve_constrained(spec, spec.target_S, spec.target_S, pois, inner);
    CHECK(rep.boundary_hit);
    // slack constraints: the maximizer sits at the bottom of the searched box
    CHECK(rep.lambda_u_star <= (spec.half_spread_h + spec.fee_f) * 1e-2);
    CHECK(rep.lambda_o_star <= (spec.half_spread_h + spec.max_rebate()) * 1.5);
    CHECK(rep.achieved_shortfall_u <= spec.target_S);
    CHECK_THROWS_AS(solve_constrained(spec, 0.0, 10.0, pois, inner), std::invalid_argument);
}

TEST_CASE("dual search meets a binding shortfall tolerance") {
    const MarketSpec spec = fixtures::standard_spec(1);
    const OutflowModel pois = OutflowModel::make_poisson({2200.0});
    SAConfig inner;
    inner.iterations_N = 400;
    inner.initial_X0 = benchmark_allocations(spec).X_E;
    inner.seed = 22;
    inner.eval_count = 1500;
    const double mu_u = 50.0;  // at most 50 shares expected shortfall
    const DualReport rep = solve_constrained(spec, mu_u, spec.target_S, pois, inner);

    // re-evaluate the achieved shortfall on an independent batch
    OutflowSample xi;
    double acc = 0.0;
    double acc_sq = 0.0;
    const long n = 20000;
    for (long i = 0; i < n; ++i) {
        pois.draw_row(909, streams::kHoldout, i, xi.xi);
        const double shortfall =
            std::max(spec.target_S - total_filled(rep.X_star, xi, spec), 0.0);
        acc += shortfall;
        acc_sq += shortfall * shortfall;
    }
    const double mean = acc / static_cast<double>(n);
    const double se = std::sqrt(
        std::max(0.0, (acc_sq - acc * acc / static_cast<double>(n)) / (n - 1.0)) /
        static_cast<double>(n));
    CHECK(mean <= mu_u + 3.0 * se + 5.0);
    CHECK(std::fabs(mean - rep.achieved_shortfall_u) <= 3.0 * se + 3.0);
}

TEST_CASE("dual objective is concave along a lambda slice") {
    // phi(lambda) = V*(lambda) - lambda.mu is an infimum of affine functions
    // of lambda, so midpoints dominate chords up to Monte-Carlo noise
    const MarketSpec base = fixtures::standard_spec(1);
    const OutflowModel pois = OutflowModel::make_poisson({2200.0});
    const double mu_u = 100.0;
    const double mu_o = 100.0;
    auto phi = [&](double lu) {
        MarketSpec spec = base;
        spec.lambda_u = lu;
        SAConfig cfg;
        cfg.iterations_N = 2500;
        cfg.initial_X0 = benchmark_allocations(spec).X_E;
        cfg.seed = 23;
        cfg.eval_count = 30000;
        const SAReport rep = solve_sa(spec, pois, cfg);
        return rep.objective_estimate - lu * mu_u - spec.lambda_o * mu_o;
    };
    const double lo = phi(200.0);
    const double mid = phi(300.0);
    const double hi = phi(400.0);
    CHECK(mid >= 0.5 * lo + 0.5 * hi - 2000.0);  // slack for SA + evaluation noise
}
