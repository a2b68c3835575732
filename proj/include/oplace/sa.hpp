#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "oplace/market.hpp"
#include "oplace/outflow.hpp"

namespace oplace {

struct SAConfig {
    long iterations_N = 1000;
    Allocation initial_X0;
    std::optional<double> step_gamma;     // overrides default_step when set
    double burn_in_fraction = 0.0;        // iterates discarded from the average
    enum class Projection { box, none } projection = Projection::box;
    std::uint64_t seed = 0;
    long eval_count = 2000;               // independent batch for the objective estimate
    int workers = 1;
};

struct SAReport {
    Allocation X_hat;
    double objective_estimate = 0.0;  // mills, total cost
    double objective_se = 0.0;        // Monte-Carlo standard error of the estimate
    double bound_DG_over_sqrtN = 0.0; // a-priori performance bound, mills
    // (iteration, iterate) pairs, downsampled to at most ~256 points
    std::vector<std::pair<long, Allocation>> iterate_trace;
};

// Subgradient of the realized cost at X for the draw xi. Components:
//   d/dM   = h + f - lambda_u 1{A<S} + lambda_o 1{A>S}
//   d/dL_k = (-(h+r_k) - lambda_u 1{A<S} + lambda_o 1{A>S}) 1{xi_k > Q_k + L_k}
// Kinks (A = S, xi_k = Q_k + L_k) resolve by the strict inequalities.
std::vector<double> stochastic_gradient(const Allocation& x, const OutflowSample& xi,
                                        const MarketSpec& spec);

// gamma = sqrt(K) S (N (h+f+lu+lo)^2 + N sum_k (h+r_k+lu+lo)^2)^{-1/2}
double default_step(const MarketSpec& spec, long iterations_N);

// Constant-step projected subgradient iteration with iterate averaging.
// Projection::box clamps iterates to [0,S]^{K+1} (a superset of C, so the
// optimum is never excluded); Projection::none reproduces the bare iteration.
SAReport solve_sa(const MarketSpec& spec, const OutflowModel& model, const SAConfig& cfg);

// Same solver against an arbitrary row source (experiments plug in derived
// samplers, e.g. a consolidated-venue sum).
SAReport solve_sa(const MarketSpec& spec, const RowSource& source, const SAConfig& cfg);

}  // namespace oplace
