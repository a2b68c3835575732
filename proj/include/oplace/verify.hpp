#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oplace/market.hpp"
#include "oplace/outflow.hpp"
#include "oplace/sa.hpp"

namespace oplace {

// Monte-Carlo estimates of the first-order-condition probabilities at an
// allocation, against the targets
//   P(A < S)                      -> (h+f+lambda_o)/(lambda_u+lambda_o)
//   P(A < S | xi_j > Q_j + L_j)   -> (lambda_o-(h+r_j))/(lambda_u+lambda_o)
// plus the no-fill probabilities p_0, p_j behind the existence conditions.
struct KKTReport {
    long sample_count = 0;

    double p0_hat = 0.0;
    std::vector<double> pj_hat;
    std::vector<long> pj_conditioning;  // draws with xi_j > Q_j

    double shortfall_prob_hat = 0.0;
    double target_shortfall = 0.0;
    double shortfall_residual = 0.0;
    double shortfall_se = 0.0;

    std::vector<double> conditional_shortfall_hat;
    std::vector<double> target_conditional;
    std::vector<double> conditional_residual;
    std::vector<double> conditional_se;
    std::vector<long> conditional_conditioning;  // draws with xi_j > Q_j + L_j
    std::vector<bool> conditional_defined;        // false when no conditioning events
    std::vector<bool> conditional_low_confidence;  // fewer than 50 conditioning events

    bool condition8_holds = false;
    std::vector<bool> condition9_holds;
    std::vector<std::string> notes;
    std::vector<std::string> warnings;
};

KKTReport estimate_kkt(const Allocation& x, const MarketSpec& spec, const OutflowModel& model,
                       long count, std::uint64_t seed, int workers = 1);

// The two displayed hypotheses: max_k F_k(Q_k+S) < 1 (checked through the
// survival function so deep tails stay meaningful) and lambda_u below the
// all-market threshold on at least one venue.
std::vector<std::string> check_prop4_preconditions(const MarketSpec& spec,
                                                   const OutflowModel& model);

// Dual search for the cost-minimization-under-execution-constraints
// formulation: maximize phi(lambda) = V*(lambda) - lambda_u mu_u - lambda_o
// mu_o over a log-spaced grid refined by coordinate ascent, with V*(lambda)
// estimated by the SA solver under common random numbers.
struct DualReport {
    double lambda_u_star = 0.0;
    double lambda_o_star = 0.0;
    Allocation X_star;
    double achieved_shortfall_u = 0.0;  // E[(S-A)_+] at X*
    double achieved_overflow_o = 0.0;   // E[(A-S)_+] at X*
    double dual_value = 0.0;
    bool boundary_hit = false;  // argmax pinned to the searched range's edge
    std::vector<std::string> notes;
};

DualReport solve_constrained(const MarketSpec& base, double mu_u, double mu_o,
                             const OutflowModel& model, const SAConfig& inner);

// Independent oracle: batch-averaged cost minimized over a lattice on C with
// common random numbers. K <= 3.
struct BruteForceReport {
    Allocation minimizer;
    double objective = 0.0;     // batch mean at the minimizer, mills
    double objective_se = 0.0;  // Monte-Carlo SE of that mean
    long lattice_points = 0;
    std::vector<std::string> warnings;
};

BruteForceReport brute_force_solve(const MarketSpec& spec, const OutflowModel& model,
                                   double grid_step, long count, std::uint64_t seed);

// Overfill characterization for two venues and X inside C: A > S iff
//   xi_1 > Q_1 + S - M - L_2, xi_2 > Q_2 + S - M - L_1,
//   xi_1 + xi_2 > Q_1 + Q_2 + S - M.
bool overfill_predicate_two(const Allocation& x, const OutflowSample& xi,
                            const MarketSpec& spec);

// Batch helpers shared by acceptance checks and experiments.
struct BatchEval {
    double mean = 0.0;
    double se = 0.0;
};
BatchEval evaluate_on_rows(const Allocation& x, const MarketSpec& spec,
                           const std::vector<OutflowSample>& rows);
// mean and SE of v(x_a, xi) - v(x_b, xi) over a common batch
BatchEval paired_difference(const Allocation& x_a, const Allocation& x_b,
                            const MarketSpec& spec, const std::vector<OutflowSample>& rows);

}  // namespace oplace
