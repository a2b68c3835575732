#include "oplace/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "oplace/errors.hpp"
#include "oplace/rng.hpp"
#include "oplace/stats.hpp"
#include "oplace/verify.hpp"

namespace oplace {

namespace {

constexpr long kChunk = 8192;

struct EvalAccum {
    double v_sum = 0.0;
    double v_sq = 0.0;
    double fill_sum = 0.0;

    void merge(const EvalAccum& o) {
        v_sum += o.v_sum;
        v_sq += o.v_sq;
        fill_sum += o.fill_sum;
    }
};

EvalAccum eval_chunk(const Allocation& x, const MarketSpec& spec, const RowSource& source,
                     std::uint64_t seed, long begin, long end) {
    EvalAccum acc;
    OutflowSample xi;
    for (long i = begin; i < end; ++i) {
        source.draw_row(seed, streams::kEval, i, xi.xi);
        const double v = realized_cost(x, xi, spec);
        acc.v_sum += v;
        acc.v_sq += v * v;
        acc.fill_sum += total_filled(x, xi, spec);
    }
    return acc;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

}  // namespace

EvaluationResult evaluate(const Allocation& x, const MarketSpec& spec, const RowSource& source,
                          long count, std::uint64_t seed, const std::string& label,
                          int workers) {
    require_assumptions(spec);
    if (count < 2) throw std::invalid_argument("evaluate: count must be >= 2");
    if (x.venues() != spec.venues()) {
        throw std::invalid_argument("evaluate: allocation venue count mismatch");
    }

    EvalAccum total;
    std::vector<std::pair<long, long>> chunks;
    for (long b = 0; b < count; b += kChunk) chunks.emplace_back(b, std::min(count, b + kChunk));
    if (workers > 1 && chunks.size() > 1) {
        std::vector<std::future<EvalAccum>> futs;
        futs.reserve(chunks.size());
        for (auto [b, e] : chunks) {
            futs.push_back(std::async(std::launch::async, eval_chunk, std::cref(x),
                                      std::cref(spec), std::cref(source), seed, b, e));
        }
        for (auto& f : futs) total.merge(f.get());
    } else {
        for (auto [b, e] : chunks) total.merge(eval_chunk(x, spec, source, seed, b, e));
    }

    const double n = static_cast<double>(count);
    EvaluationResult out;
    out.label = label;
    out.count = count;
    out.avg_cost_per_share = total.v_sum / (n * spec.target_S);
    const double var = std::max(0.0, (total.v_sq - total.v_sum * total.v_sum / n) / (n - 1.0));
    out.ci95_halfwidth = kZ95 * std::sqrt(var / n) / spec.target_S;
    out.avg_filled = total.fill_sum / n;
    return out;
}

EvaluationResult evaluate(const Allocation& x, const MarketSpec& spec, const OutflowModel& model,
                          long count, std::uint64_t seed, const std::string& label,
                          int workers) {
    model.validate();
    return evaluate(x, spec, ModelRowSource(model), count, seed, label, workers);
}

BenchmarkSet benchmark_allocations(const MarketSpec& spec) {
    const std::size_t k = spec.venues();
    const double s = spec.target_S;
    BenchmarkSet out;
    out.X_M = Allocation{s, std::vector<double>(k, 0.0)};
    out.X_L = Allocation{0.0, std::vector<double>(k, 0.0)};
    out.X_L.limits_L[0] = s;
    const double share = s / static_cast<double>(k + 1);
    out.X_E = Allocation{share, std::vector<double>(k, share)};
    return out;
}

std::vector<ConvergenceRow> run_convergence_study(const MarketSpec& spec,
                                                  const OutflowModel& model,
                                                  const ConvergenceStudyConfig& cfg,
                                                  std::optional<Allocation> reference) {
    require_assumptions(spec);
    model.validate();
    if (cfg.starts.empty() || cfg.iteration_grid.empty()) {
        throw std::invalid_argument("run_convergence_study: need starts and an N grid");
    }

    Allocation x_ref;
    if (reference.has_value()) {
        x_ref = *reference;
    } else if (spec.venues() == 1) {
        const SingleExchangeSolution sol = solve_single(spec, model);
        x_ref = Allocation{sol.M_star, {sol.L_star}};
    } else {
        x_ref = brute_force_solve(spec, model, spec.target_S / 100.0, cfg.holdout_count,
                                  streams::derive(cfg.seed, {streams::kBrute}))
                    .minimizer;
    }

    std::vector<OutflowSample> holdout(static_cast<std::size_t>(cfg.holdout_count));
    for (long i = 0; i < cfg.holdout_count; ++i) {
        model.draw_row(cfg.seed, streams::kHoldout, i, holdout[static_cast<std::size_t>(i)].xi);
    }
    const BatchEval ref_eval = evaluate_on_rows(x_ref, spec, holdout);

    std::vector<ConvergenceRow> rows;
    for (std::size_t s_idx = 0; s_idx < cfg.starts.size(); ++s_idx) {
        const auto& [label, x0] = cfg.starts[s_idx];
        for (long n : cfg.iteration_grid) {
            SAConfig sa = cfg.base;
            sa.initial_X0 = x0;
            sa.iterations_N = n;
            sa.seed = streams::derive(cfg.seed, {0xC0DEu, s_idx});
            const SAReport rep = solve_sa(spec, model, sa);
            const BatchEval got = evaluate_on_rows(rep.X_hat, spec, holdout);
            const BatchEval diff = paired_difference(rep.X_hat, x_ref, spec, holdout);
            ConvergenceRow row;
            row.x0_label = label;
            row.iterations = n;
            row.objective = got.mean;
            row.reference = ref_eval.mean;
            row.gap = diff.mean;
            row.gap_rel = diff.mean / std::fabs(ref_eval.mean);
            row.gap_se = diff.se;
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {

void apply_parameter(MarketSpec& spec, OutflowModel& model, const std::string& name,
                     double value) {
    auto venue_index = [&](const std::string& prefix) -> std::size_t {
        const std::string suffix = name.substr(prefix.size());
        const long idx = std::stol(suffix);
        if (idx < 1 || static_cast<std::size_t>(idx) > spec.venues()) {
            throw std::invalid_argument("sweep parameter '" + name + "': venue out of range");
        }
        return static_cast<std::size_t>(idx - 1);
    };
    if (name == "lambda_u") {
        spec.lambda_u = value;
    } else if (name == "lambda_o") {
        spec.lambda_o = value;
    } else if (name == "h") {
        spec.half_spread_h = value;
    } else if (name == "f") {
        spec.fee_f = value;
    } else if (name == "S") {
        spec.target_S = value;
    } else if (name == "alpha") {
        if (model.kind != OutflowKind::factor) {
            throw std::invalid_argument("sweep parameter 'alpha' requires a factor model");
        }
        model.factor_alpha = value;
    } else if (name.rfind("r_", 0) == 0) {
        spec.rebates_r[venue_index("r_")] = value;
    } else if (name.rfind("Q_", 0) == 0) {
        spec.queues_Q[venue_index("Q_")] = value;
    } else if (name.rfind("mu_", 0) == 0) {
        model.means[venue_index("mu_")] = value;
    } else {
        throw std::invalid_argument("unknown sweep parameter '" + name + "'");
    }
}

}  // namespace

std::vector<SweepRow> run_sensitivity_sweep(const MarketSpec& spec, const OutflowModel& model,
                                            const std::string& parameter,
                                            const std::vector<double>& grid,
                                            const SAConfig& cfg) {
    if (grid.empty()) throw std::invalid_argument("run_sensitivity_sweep: empty grid");
    std::vector<SweepRow> rows;
    for (double value : grid) {
        MarketSpec sp = spec;
        OutflowModel mo = model;
        apply_parameter(sp, mo, parameter, value);
        require_assumptions(sp);
        mo.validate();

        // start at the all-market vertex: venue gradients are gated by the
        // full-fill indicator, so limit sizes must grow from below (starting
        // them large freezes them); also rescales with S sweeps
        SAConfig sa = cfg;
        sa.initial_X0 = benchmark_allocations(sp).X_M;
        const SAReport rep = solve_sa(sp, mo, sa);  // same seed: paired across the grid

        MarketSpec sp1 = sp;
        sp1.rebates_r = {sp.rebates_r[0]};
        sp1.queues_Q = {sp.queues_Q[0]};
        const SingleExchangeSolution single = solve_single(sp1, venue_marginal(mo, 0));

        SweepRow row;
        row.value = value;
        row.M_hat = rep.X_hat.market_M;
        row.L_hat = rep.X_hat.limits_L;
        row.M_single = single.M_star;
        row.L_single = single.L_star;
        rows.push_back(row);
    }
    return rows;
}

void ConsolidatedRowSource::draw_row(std::uint64_t seed, std::uint64_t purpose, long row,
                                     std::vector<double>& out) const {
    std::vector<double> inner;
    model_->draw_row(seed, purpose, row, inner);
    out.resize(1);
    out[0] = 0.0;
    for (double v : inner) out[0] += v;
}

std::vector<FragmentationRow> run_fragmentation_study(const MarketSpec& spec,
                                                      const std::vector<double>& alphas,
                                                      double mu, const SAConfig& cfg,
                                                      long eval_count) {
    if (spec.venues() != 2) throw std::invalid_argument("run_fragmentation_study: requires K=2");
    require_assumptions(spec);
    if (alphas.empty()) throw std::invalid_argument("run_fragmentation_study: empty alpha grid");

    MarketSpec consolidated = spec;
    consolidated.rebates_r = {0.5 * (spec.rebates_r[0] + spec.rebates_r[1])};
    consolidated.queues_Q = {spec.queues_Q[0] + spec.queues_Q[1]};

    const std::uint64_t eval_seed = streams::derive(cfg.seed, {0xF4A6u});
    std::vector<FragmentationRow> rows;
    for (double alpha : alphas) {
        const OutflowModel frag = OutflowModel::make_factor({mu, mu}, alpha, 1.0);

        // all-market start keeps the indicator-gated limit gradients live
        SAConfig sa = cfg;
        sa.initial_X0 = benchmark_allocations(spec).X_M;
        const SAReport rep = solve_sa(spec, frag, sa);
        const EvaluationResult w_frag =
            evaluate(rep.X_hat, spec, frag, eval_count, eval_seed, "fragmented");

        const ConsolidatedRowSource source(frag);
        SAConfig sa_c = cfg;
        sa_c.initial_X0 = benchmark_allocations(consolidated).X_M;
        const SAReport rep_c = solve_sa(consolidated, source, sa_c);
        const EvaluationResult w_consol =
            evaluate(rep_c.X_hat, consolidated, source, eval_count, eval_seed, "consolidated");

        FragmentationRow row;
        row.alpha = alpha;
        row.M_hat = rep.X_hat.market_M;
        row.L1_hat = rep.X_hat.limits_L[0];
        row.L2_hat = rep.X_hat.limits_L[1];
        row.total = row.M_hat + row.L1_hat + row.L2_hat;
        row.W_fragmented = w_frag.avg_cost_per_share;
        row.W_fragmented_ci = w_frag.ci95_halfwidth;
        row.W_consolidated = w_consol.avg_cost_per_share;
        row.W_consolidated_ci = w_consol.ci95_halfwidth;
        rows.push_back(row);
    }
    return rows;
}

std::vector<BenchmarkTableRow> run_benchmark_table(const MarketSpec& single_venue_template,
                                                   const BenchmarkTableParams& params) {
    if (single_venue_template.venues() != 1) {
        throw std::invalid_argument("run_benchmark_table: template must have one venue");
    }
    std::vector<BenchmarkTableRow> rows;
    for (double s : params.targets) {
        for (std::size_t k : params.venue_counts) {
            MarketSpec spec = single_venue_template;
            spec.target_S = s;
            spec.rebates_r.assign(k, single_venue_template.rebates_r[0]);
            spec.queues_Q.assign(k, single_venue_template.queues_Q[0]);
            require_assumptions(spec);
            const OutflowModel model =
                OutflowModel::make_factor(std::vector<double>(k, params.mu), params.alpha, 1.0);

            const BenchmarkSet bench = benchmark_allocations(spec);
            SAConfig sa;
            sa.iterations_N = params.iterations_N;
            sa.initial_X0 = bench.X_E;
            sa.seed = streams::derive(params.seed, {k, static_cast<std::uint64_t>(s)});
            sa.eval_count = std::max<long>(params.eval_count, 2);
            const SAReport rep = solve_sa(spec, model, sa);

            const std::uint64_t eval_seed =
                streams::derive(params.seed, {0x7AB1Eu, k, static_cast<std::uint64_t>(s)});
            const EvaluationResult w_m =
                evaluate(bench.X_M, spec, model, params.eval_count, eval_seed, "X_M");
            const EvaluationResult w_l =
                evaluate(bench.X_L, spec, model, params.eval_count, eval_seed, "X_L");
            const EvaluationResult w_e =
                evaluate(bench.X_E, spec, model, params.eval_count, eval_seed, "X_E");
            const EvaluationResult w_x =
                evaluate(rep.X_hat, spec, model, params.eval_count, eval_seed, "X_hat");

            BenchmarkTableRow row;
            row.venue_count = k;
            row.target = s;
            row.allocation_over_S.push_back(rep.X_hat.market_M / s);
            for (double l : rep.X_hat.limits_L) row.allocation_over_S.push_back(l / s);
            row.W_market = w_m.avg_cost_per_share;
            row.W_limit = w_l.avg_cost_per_share;
            row.W_equal = w_e.avg_cost_per_share;
            row.W_solution = w_x.avg_cost_per_share;
            row.max_ci95 = std::max({w_m.ci95_halfwidth, w_l.ci95_halfwidth, w_e.ci95_halfwidth,
                                     w_x.ci95_halfwidth});
            rows.push_back(row);
        }
    }
    return rows;
}

std::string BucketKey::label() const {
    static const char* names[3] = {"L", "M", "H"};
    std::string out;
    for (std::size_t i = 0; i < terciles.size(); ++i) {
        if (i) out += "|";
        out += names[terciles[i]];
    }
    return out;
}

BucketSolveResult bucket_and_solve(const OutflowModel& empirical, const MarketSpec& spec,
                                   const SAConfig& cfg) {
    empirical.validate();
    require_assumptions(spec);
    if (empirical.kind != OutflowKind::empirical) {
        throw PreconditionError("bucket_and_solve: needs an empirical model");
    }
    const std::size_t n_features = empirical.feature_names.size();
    if (n_features == 0 || empirical.features.size() != empirical.rows.size()) {
        throw PreconditionError("bucket_and_solve: empirical rows carry no feature columns");
    }

    BucketSolveResult result;
    result.feature_names = empirical.feature_names;

    // tercile boundaries from the full training set (equal-size thirds)
    const std::size_t n = empirical.rows.size();
    for (std::size_t f = 0; f < n_features; ++f) {
        std::vector<double> vals(n);
        for (std::size_t i = 0; i < n; ++i) vals[i] = empirical.features[i][f];
        std::sort(vals.begin(), vals.end());
        const auto b1 = vals[(n + 2) / 3 - 1];
        const auto b2 = vals[(2 * n + 2) / 3 - 1];
        result.tercile_boundaries.emplace_back(b1, b2);
    }

    auto key_of = [&](const std::vector<double>& feats) {
        BucketKey key;
        key.terciles.resize(n_features);
        for (std::size_t f = 0; f < n_features; ++f) {
            const auto [b1, b2] = result.tercile_boundaries[f];
            key.terciles[f] = feats[f] <= b1 ? 0 : (feats[f] <= b2 ? 1 : 2);
        }
        return key;
    };

    std::map<BucketKey, std::vector<std::vector<double>>> buckets;
    for (std::size_t i = 0; i < n; ++i) {
        buckets[key_of(empirical.features[i])].push_back(empirical.rows[i]);
    }

    std::uint64_t bucket_index = 0;
    for (auto& [key, rows] : buckets) {
        BucketEntry entry;
        entry.key = key;
        entry.row_count = static_cast<long>(rows.size());
        if (rows.size() >= 3) {
            OutflowModel sub = OutflowModel::make_empirical(rows);
            SAConfig sa = cfg;
            sa.initial_X0 = benchmark_allocations(spec).X_M;  // limit sizes grow from below
            sa.seed = streams::derive(cfg.seed, {streams::kBucket, bucket_index});
            entry.allocation = solve_sa(spec, sub, sa).X_hat;
            entry.solved = true;
        }
        result.entries.push_back(std::move(entry));
        ++bucket_index;
    }
    return result;
}

std::string to_csv(const std::vector<ConvergenceRow>& rows) {
    std::ostringstream os;
    os << "x0,iterations,objective,reference,gap,gap_rel,gap_se\n";
    for (const auto& r : rows) {
        os << r.x0_label << "," << r.iterations << "," << format_double(r.objective) << ","
           << format_double(r.reference) << "," << format_double(r.gap) << ","
           << format_double(r.gap_rel) << "," << format_double(r.gap_se) << "\n";
    }
    return os.str();
}

std::string to_csv(const std::vector<SweepRow>& rows, std::size_t venue_count,
                   const std::string& parameter) {
    std::ostringstream os;
    os << parameter << ",M_hat";
    for (std::size_t k = 1; k <= venue_count; ++k) os << ",L" << k << "_hat";
    os << ",M_single,L_single\n";
    for (const auto& r : rows) {
        os << format_double(r.value) << "," << format_double(r.M_hat);
        for (double l : r.L_hat) os << "," << format_double(l);
        os << "," << format_double(r.M_single) << "," << format_double(r.L_single) << "\n";
    }
    return os.str();
}

std::string to_csv(const std::vector<FragmentationRow>& rows) {
    std::ostringstream os;
    os << "alpha,M_hat,L1_hat,L2_hat,total,W_fragmented,W_fragmented_ci,"
          "W_consolidated,W_consolidated_ci\n";
    for (const auto& r : rows) {
        os << format_double(r.alpha) << "," << format_double(r.M_hat) << ","
           << format_double(r.L1_hat) << "," << format_double(r.L2_hat) << ","
           << format_double(r.total) << "," << format_double(r.W_fragmented) << ","
           << format_double(r.W_fragmented_ci) << "," << format_double(r.W_consolidated) << ","
           << format_double(r.W_consolidated_ci) << "\n";
    }
    return os.str();
}

std::string to_csv(const std::vector<BenchmarkTableRow>& rows, std::size_t max_venues) {
    std::ostringstream os;
    os << "K,S,M_over_S";
    for (std::size_t k = 1; k <= max_venues; ++k) os << ",L" << k << "_over_S";
    os << ",W_XM,W_XL,W_XE,W_Xhat,max_ci95\n";
    for (const auto& r : rows) {
        os << r.venue_count << "," << format_double(r.target);
        for (std::size_t i = 0; i <= max_venues; ++i) {
            os << ",";
            if (i < r.allocation_over_S.size()) os << format_double(r.allocation_over_S[i]);
        }
        os << "," << format_double(r.W_market) << "," << format_double(r.W_limit) << ","
           << format_double(r.W_equal) << "," << format_double(r.W_solution) << ","
           << format_double(r.max_ci95) << "\n";
    }
    return os.str();
}

std::string to_csv(const BucketSolveResult& result) {
    std::ostringstream os;
    os << "bucket";
    for (const auto& name : result.feature_names) os << "," << name << "_tercile";
    os << ",rows,solved,M_hat,L_hat...\n";
    for (const auto& e : result.entries) {
        os << e.key.label();
        for (int t : e.key.terciles) os << "," << t;
        os << "," << e.row_count << "," << (e.solved ? 1 : 0);
        if (e.solved) {
            os << "," << format_double(e.allocation.market_M);
            for (double l : e.allocation.limits_L) os << "," << format_double(l);
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace oplace
