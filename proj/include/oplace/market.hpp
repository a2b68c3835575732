#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace oplace {

// Problem data for one placement decision. Money quantities are in mills
// (1e-4 dollars) per share, share quantities are real-valued; rounding to
// whole shares happens only at the CLI boundary.
struct MarketSpec {
    double half_spread_h = 0.0;     // mills/share
    double fee_f = 0.0;             // mills/share, taking fee on the cheapest venue
    std::vector<double> rebates_r;  // mills/share, one per venue, may be negative
    double lambda_u = 0.0;          // mills/share shortfall penalty
    double lambda_o = 0.0;          // mills/share overflow penalty
    double target_S = 0.0;          // shares
    std::vector<double> queues_Q;   // shares ahead of us at each venue

    std::size_t venues() const { return rebates_r.size(); }
    double max_rebate() const;
    double min_rebate() const;
};

// Decision vector X = (M, L_1..L_K), all components >= 0.
struct Allocation {
    double market_M = 0.0;
    std::vector<double> limits_L;

    std::size_t venues() const { return limits_L.size(); }
};

// One realization of the per-venue queue outflows over the horizon.
struct OutflowSample {
    std::vector<double> xi;
};

// The three indicator families that fully determine the stochastic gradient.
// A == S leaves both target indicators false (the penalty is one-sided on
// each side, and the gradient uses strict inequalities).
struct OutcomeIndicators {
    bool under_target = false;
    bool over_target = false;
    std::vector<bool> full_fill;
};

struct AssumptionViolation {
    std::string assumption;  // "A1" or "A2"
    std::string detail;
};

// Shares bought by a limit order of size l_k behind a queue q_k when xi_k
// flows out: (xi-q)_+ - (xi-q-l)_+, always in [0, l_k].
double limit_fill(double xi_k, double q_k, double l_k);

// A(X, xi) = M + sum of limit fills.
double total_filled(const Allocation& x, const OutflowSample& xi, const MarketSpec& spec);

// v(X, xi) = (h+f)M - sum_k (h+r_k) fill_k + lambda_u (S-A)_+ + lambda_o (A-S)_+.
double realized_cost(const Allocation& x, const OutflowSample& xi, const MarketSpec& spec);

OutcomeIndicators outcome_indicators(const Allocation& x, const OutflowSample& xi,
                                     const MarketSpec& spec);

// Membership in C = {0 <= M <= S, 0 <= L_k <= S-M, M + sum L_k >= S}.
bool feasible_set_contains(const Allocation& x, const MarketSpec& spec);

// Maps any X >= 0 into C: cap M at S, cap each L_k at S-M, then pad the last
// venue's limit by the remaining deficit. The capping steps never increase
// the realized cost pathwise; the padding step never increases it either
// because the padded total is exactly S.
Allocation truncate_to_feasible(const Allocation& x, const MarketSpec& spec);

// Empty iff A1 (min_k r_k + h > 0) and A2 (lambda_o > h + max_k r_k and
// lambda_o > -(h+f)) hold, along with basic shape requirements.
std::vector<AssumptionViolation> validate_assumptions(const MarketSpec& spec);

// Throws PreconditionError when validate_assumptions is nonempty.
void require_assumptions(const MarketSpec& spec);

}  // namespace oplace
