#pragma once

// Shared test fixtures: the pricing setup used across the numerical studies
// (h=200, f=30, r=20, lambda_u=260, lambda_o=240 mills) and helpers.

#include <vector>

#include "oplace/market.hpp"

namespace fixtures {

// K identical venues at the standard U.S.-equity-scale prices.
inline oplace::MarketSpec standard_spec(std::size_t venues, double target = 1000.0,
                                        double queue = 2000.0) {
    oplace::MarketSpec spec;
    spec.half_spread_h = 200.0;
    spec.fee_f = 30.0;
    spec.rebates_r.assign(venues, 20.0);
    spec.lambda_u = 260.0;
    spec.lambda_o = 240.0;
    spec.target_S = target;
    spec.queues_Q.assign(venues, queue);
    return spec;
}

// The two-venue configuration with an interior optimum that the two-exchange
// solver is validated against (root cross-checked by an independent
// quadrature+bisection route and Monte-Carlo brute force):
// exponential means 700, Q=(100,150), lambda_u=lambda_o=800.
inline oplace::MarketSpec interior_two_venue_spec() {
    oplace::MarketSpec spec;
    spec.half_spread_h = 200.0;
    spec.fee_f = 30.0;
    spec.rebates_r = {20.0, 20.0};
    spec.lambda_u = 800.0;
    spec.lambda_o = 800.0;
    spec.target_S = 1000.0;
    spec.queues_Q = {100.0, 150.0};
    return spec;
}

}  // namespace fixtures
