#include "oplace/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "oplace/errors.hpp"
#include "oplace/rng.hpp"
#include "oplace/stats.hpp"

namespace oplace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double threshold_or_inf(double numerator, double cdf_value, double h_plus_r) {
    if (numerator <= 0.0) return -kInf;  // market orders always preferable
    if (cdf_value <= 0.0) return kInf;
    return numerator / cdf_value - h_plus_r;
}

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;
};

void adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb, double whole, double abs_tol, int depth,
                      QuadResult& out) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * abs_tol) {
        out.value += left + right + delta / 15.0;
        out.abs_error += std::fabs(delta) / 15.0;
        return;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, abs_tol / 2.0, depth - 1, out);
    adaptive_simpson(f, m, b, fm, frm, fb, right, abs_tol / 2.0, depth - 1, out);
}

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol) {
    QuadResult out;
    if (!(b > a)) return out;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, abs_tol, 60, out);
    return out;
}

double marginal_pdf(const OutflowModel& model, std::size_t venue, double x) {
    switch (model.kind) {
        case OutflowKind::exponential: {
            const double mu = model.mean_of(venue);
            return x < 0.0 ? 0.0 : std::exp(-x / mu) / mu;
        }
        case OutflowKind::pareto: {
            const double a = model.pareto_tail;
            const double xm = model.mean_of(venue) * (a - 1.0) / a;
            return x < xm ? 0.0 : a * std::pow(xm, a) / std::pow(x, a + 1.0);
        }
        default:
            throw std::invalid_argument("marginal_pdf: continuous kinds only");
    }
}

bool discrete_kind(const OutflowModel& model) {
    return model.kind == OutflowKind::poisson ||
           (model.kind == OutflowKind::factor && model.factor_alpha == 0.0);
}

// Mean realized cost over a freshly drawn batch; used only to pick among
// multiple Eq-12c roots.
double mc_objective(const Allocation& x, const MarketSpec& spec, const OutflowModel& model,
                    long count, std::uint64_t seed) {
    OutflowSample row;
    double acc = 0.0;
    for (long i = 0; i < count; ++i) {
        model.draw_row(seed, streams::kBrute, i, row.xi);
        acc += realized_cost(x, row, spec);
    }
    return acc / static_cast<double>(count);
}

}  // namespace

std::string to_string(SingleExchangeSolution::Regime regime) {
    switch (regime) {
        case SingleExchangeSolution::Regime::all_limit: return "all-limit";
        case SingleExchangeSolution::Regime::interior: return "interior";
        case SingleExchangeSolution::Regime::all_market: return "all-market";
    }
    return "?";
}

SingleExchangeSolution solve_single(const MarketSpec& spec, const OutflowModel& model) {
    if (spec.venues() != 1 || model.venues() != 1) {
        throw std::invalid_argument("solve_single: requires exactly one venue (K=1)");
    }
    require_assumptions(spec);
    model.validate();

    const double h = spec.half_spread_h;
    const double f = spec.fee_f;
    const double r = spec.rebates_r[0];
    const double q_queue = spec.queues_Q[0];
    const double s = spec.target_S;
    const double numerator = 2.0 * h + f + r;

    SingleExchangeSolution sol;
    sol.lambda_lower = threshold_or_inf(numerator, cdf(model, 0, q_queue + s), h + r);
    sol.lambda_upper = threshold_or_inf(numerator, cdf(model, 0, q_queue), h + r);

    if (approx_leq(spec.lambda_u, sol.lambda_lower)) {
        sol.regime = SingleExchangeSolution::Regime::all_limit;
        sol.M_star = 0.0;
        sol.L_star = s;
        return sol;
    }
    if (approx_leq(sol.lambda_upper, spec.lambda_u)) {
        sol.regime = SingleExchangeSolution::Regime::all_market;
        sol.M_star = s;
        sol.L_star = 0.0;
        return sol;
    }
    const double ratio = numerator / (spec.lambda_u + h + r);
    const double q = quantile(model, 0, ratio);
    sol.regime = SingleExchangeSolution::Regime::interior;
    sol.L_star = std::clamp(q - q_queue, 0.0, s);
    sol.M_star = s - sol.L_star;
    return sol;
}

std::vector<std::string> check_corollary_preconditions(const MarketSpec& spec,
                                                       const OutflowModel& model) {
    if (spec.venues() != 2 || model.venues() != 2) {
        throw std::invalid_argument("check_corollary_preconditions: requires K=2");
    }
    const double h = spec.half_spread_h;
    const double f = spec.fee_f;
    const double r1 = spec.rebates_r[0];
    const double r2 = spec.rebates_r[1];
    const double s = spec.target_S;
    const double f1q = cdf(model, 0, spec.queues_Q[0]);
    const double f2q = cdf(model, 1, spec.queues_Q[1]);
    std::vector<std::string> out;

    const double sf1qs = survival(model, 0, spec.queues_Q[0] + s);
    const double sf2qs = survival(model, 1, spec.queues_Q[1] + s);
    if (!(sf1qs > 0.0 && sf2qs > 0.0)) {
        std::ostringstream os;
        os << "condition 1 violated: max_k F_k(Q_k+S) = 1 (survival "
           << sf1qs << ", " << sf2qs << ")";
        out.push_back(os.str());
    }

    const double upper1 = threshold_or_inf(2.0 * h + f + r1, f1q, h + r1);
    const double upper2 = threshold_or_inf(2.0 * h + f + r2, f2q, h + r2);
    if (!(spec.lambda_u < std::max(upper1, upper2))) {
        std::ostringstream os;
        os << "condition 2 violated: lambda_u = " << spec.lambda_u
           << " is not below max_k{(2h+f+r_k)/F_k(Q_k) - (h+r_k)} = " << std::max(upper1, upper2);
        out.push_back(os.str());
    }
    const double rmax = spec.max_rebate();
    const double lower = threshold_or_inf(2.0 * h + f + rmax, f1q * f2q, h + rmax);
    if (!(spec.lambda_u >= lower)) {
        std::ostringstream os;
        os << "condition 2 violated: lambda_u = " << spec.lambda_u
           << " is below (2h+f+max r)/(F_1(Q_1)F_2(Q_2)) - (h+max r) = " << lower;
        out.push_back(os.str());
    }

    if (!(f1q < 1.0 - (h + r2) / spec.lambda_o)) {
        std::ostringstream os;
        os << "condition 3 violated: F_1(Q_1) = " << f1q << " is not below 1-(h+r_2)/lambda_o = "
           << 1.0 - (h + r2) / spec.lambda_o;
        out.push_back(os.str());
    }
    if (!(f2q < 1.0 - (h + r1) / spec.lambda_o)) {
        std::ostringstream os;
        os << "condition 3 violated: F_2(Q_2) = " << f2q << " is not below 1-(h+r_1)/lambda_o = "
           << 1.0 - (h + r1) / spec.lambda_o;
        out.push_back(os.str());
    }
    return out;
}

TwoExchangeSolution solve_two(const MarketSpec& spec, const OutflowModel& model,
                              const TwoExchangeOptions& opts) {
    if (spec.venues() != 2 || model.venues() != 2) {
        throw std::invalid_argument("solve_two: requires exactly two venues (K=2)");
    }
    require_assumptions(spec);
    model.validate();
    if (!model.independent_marginals()) {
        throw PreconditionError(
            "solve_two: venue outflows must be independent (factor alpha=0 or an "
            "independent-marginal kind); model is " + model.descriptor());
    }

    TwoExchangeSolution sol;
    sol.condition_warnings = check_corollary_preconditions(spec, model);

    const double h = spec.half_spread_h;
    const double f = spec.fee_f;
    const double r1 = spec.rebates_r[0];
    const double r2 = spec.rebates_r[1];
    const double q1_queue = spec.queues_Q[0];
    const double q2_queue = spec.queues_Q[1];
    const double s = spec.target_S;
    const double lu = spec.lambda_u;
    const double lo = spec.lambda_o;

    // conditional shortfall targets; in (0,1) under A2
    const double target1 = (lo - (h + r1)) / (lu + lo);
    const double target2 = (lo - (h + r2)) / (lu + lo);
    const double q2_star = quantile(model, 1, target1);  // pins L1 via F_2
    const double q1_star = quantile(model, 0, target2);  // pins L2 via F_1

    const auto limit1 = [&](double m) { return q2_queue + s - m - q2_star; };
    const auto limit2 = [&](double m) { return q1_queue + s - m - q1_star; };

    if (q2_star <= q2_queue || q1_star <= q1_queue) {
        std::ostringstream os;
        os << "solve_two: the implied limit sizes leave the feasible set for every M "
              "(conditional-shortfall quantile does not exceed the queue: q1*=" << q1_star
           << " vs Q_1=" << q1_queue << ", q2*=" << q2_star << " vs Q_2=" << q2_queue
           << "); no interior solution exists";
        for (const auto& w : sol.condition_warnings) os << "; " << w;
        throw NumericalError(os.str());
    }

    // window of M where (M, L1(M), L2(M)) stays strictly inside C
    const double eps = 1e-6 * s;
    const double m_hi = std::min({s, q2_queue + s - q2_star, q1_queue + s - q1_star,
                                  q1_queue + q2_queue + s - q1_star - q2_star});
    const double lo_m = eps;
    const double hi_m = m_hi - eps;
    if (!(hi_m > lo_m)) {
        std::ostringstream os;
        os << "solve_two: interior window for M is empty (upper bound " << m_hi << ")";
        for (const auto& w : sol.condition_warnings) os << "; " << w;
        throw NumericalError(os.str());
    }

    const double rhs = (lu - (h + f)) / (lu + lo);
    const bool discrete = discrete_kind(model);
    double worst_quad_error = 0.0;

    const auto lhs = [&](double m) {
        const double l1 = limit1(m);
        const double c = q1_queue + q2_queue + s - m;  // overfill cutoff for xi_1 + xi_2
        const double upper = q1_queue + l1;            // == c - q2_star
        double total = survival(model, 0, upper) * survival(model, 1, q2_star);
        if (discrete) {
            const long j_lo = static_cast<long>(std::floor(q1_star));
            const long j_hi = static_cast<long>(std::floor(upper));
            const double lam1 = model.mean_of(0);
            for (long j = j_lo + 1; j <= j_hi; ++j) {
                total += std::exp(poisson_logpmf(static_cast<double>(j), lam1)) *
                         survival(model, 1, c - static_cast<double>(j));
            }
        } else {
            const auto integrand = [&](double x) {
                return marginal_pdf(model, 0, x) * survival(model, 1, c - x);
            };
            const QuadResult q = integrate(integrand, q1_star, upper, opts.quadrature_abs_tol);
            worst_quad_error = std::max(worst_quad_error, q.abs_error);
            total += q.value;
        }
        return total;
    };

    // bracket scan, then bisection in every sign-change interval
    const int n_scan = std::max(2, opts.bracket_scan_points);
    std::vector<double> grid(static_cast<std::size_t>(n_scan) + 1);
    std::vector<double> g(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = lo_m + (hi_m - lo_m) * static_cast<double>(i) / static_cast<double>(n_scan);
        g[i] = lhs(grid[i]) - rhs;
    }
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if (g[i] == 0.0) {
            roots.push_back(grid[i]);
            continue;
        }
        if (g[i] * g[i + 1] < 0.0) {
            double a = grid[i];
            double b = grid[i + 1];
            double ga = g[i];
            for (int iter = 0; iter < 200 && b - a > 1e-13 * s; ++iter) {
                const double mid = 0.5 * (a + b);
                const double gm = lhs(mid) - rhs;
                if (gm == 0.0) {
                    a = b = mid;
                    break;
                }
                if (ga * gm < 0.0) {
                    b = mid;
                } else {
                    a = mid;
                    ga = gm;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
    }
    if (g.back() == 0.0 && (roots.empty() || roots.back() != grid.back())) {
        roots.push_back(grid.back());
    }
    if (roots.empty()) {
        std::ostringstream os;
        os << "solve_two: no sign change of the overfill equation on M in (" << lo_m << ", "
           << hi_m << "); lhs spans [" << *std::min_element(g.begin(), g.end()) + rhs << ", "
           << *std::max_element(g.begin(), g.end()) + rhs << "] against rhs " << rhs;
        for (const auto& w : sol.condition_warnings) os << "; " << w;
        throw NumericalError(os.str());
    }

    double best_m = roots.front();
    if (roots.size() > 1) {
        sol.multiple_roots = true;
        sol.condition_warnings.push_back(
            "multiple overfill-equation roots; returning the lowest-objective one");
        double best_obj = kInf;
        for (double m : roots) {
            Allocation x{m, {limit1(m), limit2(m)}};
            const double obj =
                mc_objective(x, spec, model, opts.tie_break_samples, opts.tie_break_seed);
            if (obj < best_obj) {
                best_obj = obj;
                best_m = m;
            }
        }
    }

    sol.M_star = best_m;
    sol.L1_star = limit1(best_m);
    sol.L2_star = limit2(best_m);
    sol.root_residual = std::fabs(lhs(best_m) - rhs);
    sol.integral_abs_error = worst_quad_error;
    return sol;
}

}  // namespace oplace
