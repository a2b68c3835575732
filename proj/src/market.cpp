#include "oplace/market.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "oplace/errors.hpp"

namespace oplace {

namespace {

void check_dims(const Allocation& x, const OutflowSample& xi, const MarketSpec& spec) {
    if (x.venues() != spec.venues() || xi.xi.size() != spec.venues()) {
        std::ostringstream os;
        os << "venue dimension mismatch: spec K=" << spec.venues() << ", allocation K="
           << x.venues() << ", sample K=" << xi.xi.size();
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

double MarketSpec::max_rebate() const {
    return *std::max_element(rebates_r.begin(), rebates_r.end());
}

double MarketSpec::min_rebate() const {
    return *std::min_element(rebates_r.begin(), rebates_r.end());
}

double limit_fill(double xi_k, double q_k, double l_k) {
    if (xi_k < 0.0 || q_k < 0.0 || l_k < 0.0) {
        throw std::invalid_argument("limit_fill: inputs must be nonnegative");
    }
    return std::max(xi_k - q_k, 0.0) - std::max(xi_k - q_k - l_k, 0.0);
}

double total_filled(const Allocation& x, const OutflowSample& xi, const MarketSpec& spec) {
    check_dims(x, xi, spec);
    double total = x.market_M;
    for (std::size_t k = 0; k < spec.venues(); ++k) {
        total += limit_fill(xi.xi[k], spec.queues_Q[k], x.limits_L[k]);
    }
    return total;
}

double realized_cost(const Allocation& x, const OutflowSample& xi, const MarketSpec& spec) {
    check_dims(x, xi, spec);
    const double h = spec.half_spread_h;
    double cost = (h + spec.fee_f) * x.market_M;
    double filled = x.market_M;
    for (std::size_t k = 0; k < spec.venues(); ++k) {
        const double fill = limit_fill(xi.xi[k], spec.queues_Q[k], x.limits_L[k]);
        cost -= (h + spec.rebates_r[k]) * fill;
        filled += fill;
    }
    cost += spec.lambda_u * std::max(spec.target_S - filled, 0.0);
    cost += spec.lambda_o * std::max(filled - spec.target_S, 0.0);
    return cost;
}

OutcomeIndicators outcome_indicators(const Allocation& x, const OutflowSample& xi,
                                     const MarketSpec& spec) {
    check_dims(x, xi, spec);
    OutcomeIndicators out;
    const double filled = total_filled(x, xi, spec);
    out.under_target = filled < spec.target_S;
    out.over_target = filled > spec.target_S;
    out.full_fill.resize(spec.venues());
    for (std::size_t k = 0; k < spec.venues(); ++k) {
        out.full_fill[k] = xi.xi[k] > spec.queues_Q[k] + x.limits_L[k];
    }
    return out;
}

bool feasible_set_contains(const Allocation& x, const MarketSpec& spec) {
    const double s = spec.target_S;
    if (x.market_M < 0.0 || x.market_M > s) return false;
    double sum = x.market_M;
    for (double l : x.limits_L) {
        if (l < 0.0 || l > s - x.market_M) return false;
        sum += l;
    }
    return sum >= s;
}

Allocation truncate_to_feasible(const Allocation& x, const MarketSpec& spec) {
    const double s = spec.target_S;
    Allocation out = x;
    out.market_M = std::clamp(out.market_M, 0.0, s);
    double sum = out.market_M;
    for (double& l : out.limits_L) {
        l = std::clamp(l, 0.0, s - out.market_M);
        sum += l;
    }
    if (sum < s && !out.limits_L.empty()) {
        out.limits_L.back() += s - sum;
    }
    return out;
}

std::vector<AssumptionViolation> validate_assumptions(const MarketSpec& spec) {
    std::vector<AssumptionViolation> out;
    std::ostringstream os;
    if (spec.venues() == 0 || spec.queues_Q.size() != spec.venues()) {
        os << "K=" << spec.venues() << " rebate entries vs " << spec.queues_Q.size()
           << " queue entries; need K >= 1 and matching lengths";
        out.push_back({"shape", os.str()});
        return out;
    }
    if (!(spec.target_S > 0.0)) {
        out.push_back({"shape", "target_S must be positive"});
    }
    for (std::size_t k = 0; k < spec.venues(); ++k) {
        if (spec.queues_Q[k] < 0.0) {
            out.push_back({"shape", "queues_Q must be nonnegative"});
            break;
        }
    }
    if (spec.lambda_u < 0.0 || spec.lambda_o < 0.0) {
        out.push_back({"shape", "lambda_u and lambda_o must be nonnegative"});
    }
    const double h = spec.half_spread_h;
    if (!(spec.min_rebate() + h > 0.0)) {
        std::ostringstream a1;
        a1 << "min_k(r_k) + h = " << spec.min_rebate() + h << " must be positive (h=" << h
           << ", min rebate=" << spec.min_rebate() << ")";
        out.push_back({"A1", a1.str()});
    }
    if (!(spec.lambda_o > h + spec.max_rebate())) {
        std::ostringstream a2;
        a2 << "lambda_o = " << spec.lambda_o << " must exceed h + max_k(r_k) = "
           << h + spec.max_rebate();
        out.push_back({"A2", a2.str()});
    }
    if (!(spec.lambda_o > -(h + spec.fee_f))) {
        std::ostringstream a2;
        a2 << "lambda_o = " << spec.lambda_o << " must exceed -(h+f) = " << -(h + spec.fee_f);
        out.push_back({"A2", a2.str()});
    }
    return out;
}

void require_assumptions(const MarketSpec& spec) {
    const auto violations = validate_assumptions(spec);
    if (violations.empty()) return;
    std::ostringstream os;
    os << "market spec violates assumptions:";
    for (const auto& v : violations) os << " [" << v.assumption << "] " << v.detail << ";";
    throw PreconditionError(os.str());
}

}  // namespace oplace
