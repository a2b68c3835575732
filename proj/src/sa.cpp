#include "oplace/sa.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "oplace/rng.hpp"
#include "oplace/stats.hpp"

namespace oplace {

namespace {

void validate_cfg(const MarketSpec& spec, const SAConfig& cfg) {
    if (cfg.iterations_N < 1) throw std::invalid_argument("solve_sa: iterations_N must be >= 1");
    if (!(cfg.burn_in_fraction >= 0.0 && cfg.burn_in_fraction < 1.0)) {
        throw std::invalid_argument("solve_sa: burn_in_fraction must lie in [0,1)");
    }
    if (cfg.initial_X0.venues() != spec.venues()) {
        throw std::invalid_argument("solve_sa: initial_X0 venue count mismatch");
    }
    if (cfg.initial_X0.market_M < 0.0) throw std::invalid_argument("solve_sa: X0 must be >= 0");
    for (double l : cfg.initial_X0.limits_L) {
        if (l < 0.0) throw std::invalid_argument("solve_sa: X0 must be >= 0");
    }
    if (cfg.eval_count < 2) throw std::invalid_argument("solve_sa: eval_count must be >= 2");
}

}  // namespace

std::vector<double> stochastic_gradient(const Allocation& x, const OutflowSample& xi,
                                        const MarketSpec& spec) {
    const OutcomeIndicators ind = outcome_indicators(x, xi, spec);
    const double h = spec.half_spread_h;
    const double penalty_slope = -spec.lambda_u * (ind.under_target ? 1.0 : 0.0) +
                                 spec.lambda_o * (ind.over_target ? 1.0 : 0.0);
    std::vector<double> g(spec.venues() + 1);
    g[0] = h + spec.fee_f + penalty_slope;
    for (std::size_t k = 0; k < spec.venues(); ++k) {
        g[k + 1] = ind.full_fill[k] ? (-(h + spec.rebates_r[k]) + penalty_slope) : 0.0;
    }
    return g;
}

double default_step(const MarketSpec& spec, long iterations_N) {
    if (iterations_N < 1) throw std::invalid_argument("default_step: N must be >= 1");
    const double h = spec.half_spread_h;
    const double penalties = spec.lambda_u + spec.lambda_o;
    const double n = static_cast<double>(iterations_N);
    double denom = n * std::pow(h + spec.fee_f + penalties, 2);
    for (double r : spec.rebates_r) denom += n * std::pow(h + r + penalties, 2);
    return std::sqrt(static_cast<double>(spec.venues())) * spec.target_S / std::sqrt(denom);
}

SAReport solve_sa(const MarketSpec& spec, const OutflowModel& model, const SAConfig& cfg) {
    model.validate();
    if (model.venues() != spec.venues()) {
        throw std::invalid_argument("solve_sa: model venue count mismatch");
    }
    return solve_sa(spec, ModelRowSource(model), cfg);
}

SAReport solve_sa(const MarketSpec& spec, const RowSource& source, const SAConfig& cfg) {
    require_assumptions(spec);
    validate_cfg(spec, cfg);
    if (source.venues() != spec.venues()) {
        throw std::invalid_argument("solve_sa: row source venue count mismatch");
    }

    const long n_total = cfg.iterations_N;
    const double gamma = cfg.step_gamma.value_or(default_step(spec, n_total));
    const double s = spec.target_S;
    const auto first_kept =
        static_cast<long>(std::floor(cfg.burn_in_fraction * static_cast<double>(n_total))) + 1;
    const long trace_stride = std::max<long>(1, n_total / 256);

    Allocation x = cfg.initial_X0;
    Allocation sum{0.0, std::vector<double>(spec.venues(), 0.0)};
    long kept = 0;

    SAReport report;
    report.iterate_trace.emplace_back(0, x);

    OutflowSample xi;
    for (long n = 1; n <= n_total; ++n) {
        source.draw_row(cfg.seed, streams::kSolve, n, xi.xi);
        const std::vector<double> g = stochastic_gradient(x, xi, spec);
        x.market_M -= gamma * g[0];
        for (std::size_t k = 0; k < spec.venues(); ++k) x.limits_L[k] -= gamma * g[k + 1];
        if (cfg.projection == SAConfig::Projection::box) {
            x.market_M = std::clamp(x.market_M, 0.0, s);
            for (double& l : x.limits_L) l = std::clamp(l, 0.0, s);
        }
        if (n >= first_kept) {
            sum.market_M += x.market_M;
            for (std::size_t k = 0; k < spec.venues(); ++k) sum.limits_L[k] += x.limits_L[k];
            ++kept;
        }
        if (n % trace_stride == 0 || n == n_total) report.iterate_trace.emplace_back(n, x);
    }

    report.X_hat.market_M = sum.market_M / static_cast<double>(kept);
    report.X_hat.limits_L.resize(spec.venues());
    for (std::size_t k = 0; k < spec.venues(); ++k) {
        report.X_hat.limits_L[k] = sum.limits_L[k] / static_cast<double>(kept);
    }

    // objective estimate on an evaluation batch from a disjoint stream
    double acc = 0.0;
    double acc_sq = 0.0;
    for (long i = 0; i < cfg.eval_count; ++i) {
        source.draw_row(cfg.seed, streams::kEval, i, xi.xi);
        const double v = realized_cost(report.X_hat, xi, spec);
        acc += v;
        acc_sq += v * v;
    }
    const double n_eval = static_cast<double>(cfg.eval_count);
    report.objective_estimate = acc / n_eval;
    const double var = std::max(0.0, (acc_sq - acc * acc / n_eval) / (n_eval - 1.0));
    report.objective_se = std::sqrt(var / n_eval);

    // performance bound D*G/sqrt(N): D = diam(C) = S sqrt(K+1), G bounds the
    // root-mean-square subgradient norm
    const double penalties = spec.lambda_u + spec.lambda_o;
    double g_sq = std::pow(spec.half_spread_h + spec.fee_f + penalties, 2);
    for (double r : spec.rebates_r) g_sq += std::pow(spec.half_spread_h + r + penalties, 2);
    const double diameter = s * std::sqrt(static_cast<double>(spec.venues()) + 1.0);
    report.bound_DG_over_sqrtN =
        diameter * std::sqrt(g_sq) / std::sqrt(static_cast<double>(n_total));
    return report;
}

}  // namespace oplace
