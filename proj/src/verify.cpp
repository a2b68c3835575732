#include "oplace/verify.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "oplace/errors.hpp"
#include "oplace/rng.hpp"
#include "oplace/stats.hpp"

namespace oplace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr long kChunk = 8192;  // fixed partition size; workers never change results

struct KktCounts {
    long under = 0;
    long all_no_fill = 0;
    std::vector<long> tail_j;               // xi_j > Q_j
    std::vector<long> tail_j_others_empty;  // and all other venues below queue
    std::vector<long> full_j;               // xi_j > Q_j + L_j
    std::vector<long> full_j_under;         // and A < S

    explicit KktCounts(std::size_t k)
        : tail_j(k, 0), tail_j_others_empty(k, 0), full_j(k, 0), full_j_under(k, 0) {}

    void merge(const KktCounts& o) {
        under += o.under;
        all_no_fill += o.all_no_fill;
        for (std::size_t k = 0; k < tail_j.size(); ++k) {
            tail_j[k] += o.tail_j[k];
            tail_j_others_empty[k] += o.tail_j_others_empty[k];
            full_j[k] += o.full_j[k];
            full_j_under[k] += o.full_j_under[k];
        }
    }
};

KktCounts kkt_chunk(const Allocation& x, const MarketSpec& spec, const OutflowModel& model,
                    std::uint64_t seed, long begin, long end) {
    const std::size_t k_count = spec.venues();
    KktCounts counts(k_count);
    OutflowSample xi;
    for (long i = begin; i < end; ++i) {
        model.draw_row(seed, streams::kKkt, i, xi.xi);
        const double filled = total_filled(x, xi, spec);
        const bool under = filled < spec.target_S;
        counts.under += under ? 1 : 0;
        bool all_empty = true;
        for (std::size_t k = 0; k < k_count; ++k) {
            all_empty = all_empty && xi.xi[k] <= spec.queues_Q[k];
        }
        counts.all_no_fill += all_empty ? 1 : 0;
        for (std::size_t j = 0; j < k_count; ++j) {
            if (xi.xi[j] > spec.queues_Q[j]) {
                counts.tail_j[j] += 1;
                bool others_empty = true;
                for (std::size_t k = 0; k < k_count; ++k) {
                    if (k != j) others_empty = others_empty && xi.xi[k] <= spec.queues_Q[k];
                }
                counts.tail_j_others_empty[j] += others_empty ? 1 : 0;
            }
            if (xi.xi[j] > spec.queues_Q[j] + x.limits_L[j]) {
                counts.full_j[j] += 1;
                counts.full_j_under[j] += under ? 1 : 0;
            }
        }
    }
    return counts;
}

}  // namespace

KKTReport estimate_kkt(const Allocation& x, const MarketSpec& spec, const OutflowModel& model,
                       long count, std::uint64_t seed, int workers) {
    require_assumptions(spec);
    model.validate();
    if (count < 1000) throw std::invalid_argument("estimate_kkt: count must be >= 1000");
    if (x.venues() != spec.venues()) {
        throw std::invalid_argument("estimate_kkt: allocation venue count mismatch");
    }

    KKTReport report;
    report.sample_count = count;
    if (!feasible_set_contains(x, spec)) {
        report.warnings.push_back("allocation lies outside the feasible set C");
    }

    const std::size_t k_count = spec.venues();
    KktCounts totals(k_count);
    std::vector<std::pair<long, long>> chunks;
    for (long begin = 0; begin < count; begin += kChunk) {
        chunks.emplace_back(begin, std::min(count, begin + kChunk));
    }
    if (workers > 1 && chunks.size() > 1) {
        std::vector<std::future<KktCounts>> futs;
        futs.reserve(chunks.size());
        for (auto [b, e] : chunks) {
            futs.push_back(std::async(std::launch::async, kkt_chunk, std::cref(x),
                                      std::cref(spec), std::cref(model), seed, b, e));
        }
        for (auto& f : futs) totals.merge(f.get());
    } else {
        for (auto [b, e] : chunks) totals.merge(kkt_chunk(x, spec, model, seed, b, e));
    }

    const double n = static_cast<double>(count);
    const double h = spec.half_spread_h;
    const double lu = spec.lambda_u;
    const double lo = spec.lambda_o;

    report.p0_hat = static_cast<double>(totals.all_no_fill) / n;
    report.shortfall_prob_hat = static_cast<double>(totals.under) / n;
    report.target_shortfall = (h + spec.fee_f + lo) / (lu + lo);
    report.shortfall_residual = std::fabs(report.shortfall_prob_hat - report.target_shortfall);
    report.shortfall_se = binomial_se(report.shortfall_prob_hat, count);

    report.pj_hat.resize(k_count);
    report.pj_conditioning.resize(k_count);
    report.conditional_shortfall_hat.resize(k_count);
    report.target_conditional.resize(k_count);
    report.conditional_residual.resize(k_count);
    report.conditional_se.resize(k_count);
    report.conditional_conditioning.resize(k_count);
    report.conditional_defined.resize(k_count);
    report.conditional_low_confidence.resize(k_count);
    report.condition9_holds.resize(k_count);

    const double rmax = spec.max_rebate();
    const double cond8_rhs =
        report.p0_hat > 0.0 ? (2.0 * h + spec.fee_f + rmax) / report.p0_hat - (h + rmax) : kInf;
    report.condition8_holds = lu >= cond8_rhs;
    if (report.condition8_holds && x.market_M == 0.0) {
        report.notes.push_back("condition (8) holds while M = 0: M = 0 cannot be optimal");
    }

    for (std::size_t j = 0; j < k_count; ++j) {
        const long tail = totals.tail_j[j];
        report.pj_conditioning[j] = tail;
        report.pj_hat[j] =
            tail > 0 ? static_cast<double>(totals.tail_j_others_empty[j]) / tail : 0.0;
        report.target_conditional[j] = (lo - (h + spec.rebates_r[j])) / (lu + lo);

        const long cond = totals.full_j[j];
        report.conditional_conditioning[j] = cond;
        report.conditional_defined[j] = cond > 0;
        report.conditional_low_confidence[j] = cond < 50;
        if (cond > 0) {
            report.conditional_shortfall_hat[j] =
                static_cast<double>(totals.full_j_under[j]) / static_cast<double>(cond);
            report.conditional_residual[j] =
                std::fabs(report.conditional_shortfall_hat[j] - report.target_conditional[j]);
            report.conditional_se[j] = binomial_se(report.conditional_shortfall_hat[j], cond);
        } else {
            report.conditional_shortfall_hat[j] = std::numeric_limits<double>::quiet_NaN();
            report.conditional_residual[j] = std::numeric_limits<double>::quiet_NaN();
            report.conditional_se[j] = std::numeric_limits<double>::quiet_NaN();
            std::ostringstream os;
            os << "venue " << j + 1 << ": no draws with xi_j > Q_j + L_j; conditional shortfall "
               << "undefined at this sample size";
            report.notes.push_back(os.str());
        }

        report.condition9_holds[j] = report.pj_hat[j] > report.target_conditional[j];
        if (report.condition9_holds[j] && x.limits_L[j] == 0.0) {
            std::ostringstream os;
            os << "condition (9) holds for venue " << j + 1
               << " while L_j = 0: L_j = 0 cannot be optimal";
            report.notes.push_back(os.str());
        }
    }
    return report;
}

std::vector<std::string> check_prop4_preconditions(const MarketSpec& spec,
                                                   const OutflowModel& model) {
    require_assumptions(spec);
    model.validate();
    std::vector<std::string> out;
    const double h = spec.half_spread_h;
    for (std::size_t k = 0; k < spec.venues(); ++k) {
        const double sf = survival(model, k, spec.queues_Q[k] + spec.target_S);
        if (!(sf > 0.0)) {
            std::ostringstream os;
            os << "hypothesis violated: F_" << k + 1 << "(Q_" << k + 1 << "+S) = 1 "
               << "(outflow support bounded by the queue plus target)";
            out.push_back(os.str());
        }
    }
    double max_threshold = -kInf;
    for (std::size_t k = 0; k < spec.venues(); ++k) {
        const double fq = cdf(model, k, spec.queues_Q[k]);
        const double num = 2.0 * h + spec.fee_f + spec.rebates_r[k];
        const double thr = fq > 0.0 ? (num > 0.0 ? num / fq - (h + spec.rebates_r[k]) : -kInf)
                                    : (num > 0.0 ? kInf : -kInf);
        max_threshold = std::max(max_threshold, thr);
    }
    if (!(spec.lambda_u < max_threshold)) {
        std::ostringstream os;
        os << "hypothesis violated: lambda_u = " << spec.lambda_u
           << " is not below max_k{(2h+f+r_k)/F_k(Q_k) - (h+r_k)} = " << max_threshold;
        out.push_back(os.str());
    }
    return out;
}

DualReport solve_constrained(const MarketSpec& base, double mu_u, double mu_o,
                             const OutflowModel& model, const SAConfig& inner) {
    if (!(mu_u > 0.0 && mu_o > 0.0)) {
        throw std::invalid_argument("solve_constrained: mu_u and mu_o must be positive");
    }
    model.validate();

    const double h = base.half_spread_h;
    const double scale = std::max({h + base.fee_f, h + base.max_rebate(), 1.0});
    const double lo_floor = (h + base.max_rebate()) * (1.0 + 1e-6);
    const double hi = 1e3 * scale;
    const double lu_floor = scale * 1e-3;
    constexpr int kGrid = 25;

    auto log_grid = [&](double lo, double hi_v) {
        std::vector<double> g(kGrid);
        const double la = std::log(lo);
        const double lb = std::log(hi_v);
        for (int i = 0; i < kGrid; ++i) {
            g[i] = std::exp(la + (lb - la) * static_cast<double>(i) / (kGrid - 1));
        }
        return g;
    };
    const std::vector<double> grid_u = log_grid(lu_floor, hi);
    const std::vector<double> grid_o = log_grid(lo_floor, hi);

    struct Best {
        double phi = -kInf;
        int iu = -1;
        int io = -1;
        SAReport report;
    } best;

    auto phi_at = [&](int iu, int io) {
        MarketSpec spec = base;
        spec.lambda_u = grid_u[static_cast<std::size_t>(iu)];
        spec.lambda_o = grid_o[static_cast<std::size_t>(io)];
        SAConfig cfg = inner;
        cfg.seed = streams::derive(inner.seed, {streams::kDual});
        const SAReport rep = solve_sa(spec, model, cfg);
        const double phi = rep.objective_estimate - spec.lambda_u * mu_u - spec.lambda_o * mu_o;
        return std::make_pair(phi, rep);
    };

    int iu = kGrid / 2;
    int io = kGrid / 2;
    for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < kGrid; ++i) {
            auto [phi, rep] = phi_at(i, io);
            if (phi > best.phi) best = {phi, i, io, rep};
        }
        iu = best.iu;
        for (int i = 0; i < kGrid; ++i) {
            auto [phi, rep] = phi_at(iu, i);
            if (phi > best.phi) best = {phi, iu, i, rep};
        }
        io = best.io;
    }

    DualReport out;
    out.lambda_u_star = grid_u[static_cast<std::size_t>(best.iu)];
    out.lambda_o_star = grid_o[static_cast<std::size_t>(best.io)];
    out.X_star = best.report.X_hat;
    out.dual_value = best.phi;
    out.boundary_hit = best.iu == 0 || best.iu == kGrid - 1 || best.io == 0 || best.io == kGrid - 1;
    if (out.boundary_hit) {
        out.notes.push_back(
            "dual argmax sits on the searched lambda range boundary; the requested "
            "tolerances may not be attainable");
    }

    // achieved expectations at X* on a fresh batch
    const long n_eval = std::max<long>(inner.eval_count, 20000);
    OutflowSample xi;
    double acc_u = 0.0;
    double acc_o = 0.0;
    const std::uint64_t eval_seed = streams::derive(inner.seed, {streams::kDual, 0xACEDu});
    for (long i = 0; i < n_eval; ++i) {
        model.draw_row(eval_seed, streams::kEval, i, xi.xi);
        const double filled = total_filled(out.X_star, xi, base);
        acc_u += std::max(base.target_S - filled, 0.0);
        acc_o += std::max(filled - base.target_S, 0.0);
    }
    out.achieved_shortfall_u = acc_u / static_cast<double>(n_eval);
    out.achieved_overflow_o = acc_o / static_cast<double>(n_eval);
    return out;
}

namespace {

std::vector<double> lattice(double upper, double step) {
    std::vector<double> pts;
    for (double v = 0.0; v < upper + step * 0.5; v += step) pts.push_back(std::min(v, upper));
    if (pts.back() < upper) pts.push_back(upper);
    return pts;
}

}  // namespace

BruteForceReport brute_force_solve(const MarketSpec& spec, const OutflowModel& model,
                                   double grid_step, long count, std::uint64_t seed) {
    require_assumptions(spec);
    model.validate();
    const std::size_t k_count = spec.venues();
    if (k_count > 3) throw std::invalid_argument("brute_force_solve: K <= 3 only");
    if (!(grid_step > 0.0)) throw std::invalid_argument("brute_force_solve: grid_step > 0");
    if (count < 2) throw std::invalid_argument("brute_force_solve: count must be >= 2");

    BruteForceReport report;
    if (grid_step > spec.target_S / 2.0) {
        report.warnings.push_back("grid step exceeds S/2: too coarse to bracket a minimizer");
    }

    const double s = spec.target_S;
    const double n = static_cast<double>(count);

    // common random numbers: one batch, reused at every lattice point
    std::vector<std::vector<double>> u(k_count, std::vector<double>(static_cast<std::size_t>(count)));
    {
        OutflowSample xi;
        for (long i = 0; i < count; ++i) {
            model.draw_row(seed, streams::kBrute, i, xi.xi);
            for (std::size_t k = 0; k < k_count; ++k) {
                u[k][static_cast<std::size_t>(i)] =
                    std::max(xi.xi[k] - spec.queues_Q[k], 0.0);
            }
        }
    }

    const std::vector<double> m_grid = lattice(s, grid_step);
    const double h = spec.half_spread_h;
    const double f = spec.fee_f;

    double best = kInf;
    Allocation best_x;
    long points = 0;

    if (k_count == 1) {
        const double r = spec.rebates_r[0];
        for (double m : m_grid) {
            const double l = s - m;
            double acc = 0.0;
            for (double uv : u[0]) {
                const double fill = std::min(uv, l);
                acc += (h + f) * m - (h + r) * fill + spec.lambda_u * (s - m - fill);
            }
            ++points;
            const double avg = acc / n;
            if (avg < best) {
                best = avg;
                best_x = Allocation{m, {l}};
            }
        }
    } else if (k_count == 2) {
        // histogram over B = fill_1 + fill_2 with bins aligned to the lattice,
        // so partial expectations at thresholds t = S - M are exact
        const double r1 = spec.rebates_r[0];
        const double r2 = spec.rebates_r[1];
        std::vector<double> sorted_u1 = u[0];
        std::vector<double> sorted_u2 = u[1];
        std::sort(sorted_u1.begin(), sorted_u1.end());
        std::sort(sorted_u2.begin(), sorted_u2.end());
        std::vector<double> prefix1(sorted_u1.size() + 1, 0.0);
        std::vector<double> prefix2(sorted_u2.size() + 1, 0.0);
        for (std::size_t i = 0; i < sorted_u1.size(); ++i) {
            prefix1[i + 1] = prefix1[i] + sorted_u1[i];
        }
        for (std::size_t i = 0; i < sorted_u2.size(); ++i) {
            prefix2[i + 1] = prefix2[i] + sorted_u2[i];
        }
        auto mean_fill = [&](const std::vector<double>& sorted, const std::vector<double>& prefix,
                             double cap) {
            const auto idx = static_cast<std::size_t>(
                std::upper_bound(sorted.begin(), sorted.end(), cap) - sorted.begin());
            return (prefix[idx] + cap * static_cast<double>(sorted.size() - idx)) / n;
        };

        const std::size_t n_bins = static_cast<std::size_t>(std::ceil(2.0 * s / grid_step)) + 2;
        std::vector<long> bin_count(n_bins);
        std::vector<double> bin_sum(n_bins);
        std::vector<double> b_vals(u[0].size());
        const std::vector<double> l_grid = lattice(s, grid_step);
        for (double l1 : l_grid) {
            for (double l2 : l_grid) {
                const double m_lo = std::max(0.0, s - l1 - l2);
                const double m_hi = s - std::max(l1, l2);
                if (m_hi < m_lo) continue;
                std::fill(bin_count.begin(), bin_count.end(), 0L);
                std::fill(bin_sum.begin(), bin_sum.end(), 0.0);
                for (std::size_t i = 0; i < u[0].size(); ++i) {
                    const double b = std::min(u[0][i], l1) + std::min(u[1][i], l2);
                    b_vals[i] = b;
                    auto bin = static_cast<std::size_t>(b / grid_step);
                    if (bin >= n_bins) bin = n_bins - 1;
                    bin_count[bin] += 1;
                    bin_sum[bin] += b;
                }
                std::vector<long> cum_count(n_bins + 1, 0);
                std::vector<double> cum_sum(n_bins + 1, 0.0);
                for (std::size_t i = 0; i < n_bins; ++i) {
                    cum_count[i + 1] = cum_count[i] + bin_count[i];
                    cum_sum[i + 1] = cum_sum[i] + bin_sum[i];
                }
                const double total_b = cum_sum[n_bins];
                const double cost_fixed =
                    -(h + r1) * mean_fill(sorted_u1, prefix1, l1) -
                    (h + r2) * mean_fill(sorted_u2, prefix2, l2);
                for (double m : m_grid) {
                    if (m < m_lo - 1e-9 || m > m_hi + 1e-9) continue;
                    const double t = s - m;
                    const double t_idx = t / grid_step;
                    double e_short;
                    double e_over;
                    if (std::fabs(t_idx - std::round(t_idx)) < 1e-9 &&
                        std::round(t_idx) <= static_cast<double>(n_bins)) {
                        // thresholds on bin boundaries: prefix sums are exact
                        const auto t_bin = static_cast<std::size_t>(std::round(t_idx));
                        const double below_cnt = static_cast<double>(cum_count[t_bin]);
                        const double below_sum = cum_sum[t_bin];
                        e_short = (t * below_cnt - below_sum) / n;
                        e_over = ((total_b - below_sum) - t * (n - below_cnt)) / n;
                    } else {
                        double acc_short = 0.0;
                        double acc_over = 0.0;
                        for (double b : b_vals) {
                            acc_short += std::max(t - b, 0.0);
                            acc_over += std::max(b - t, 0.0);
                        }
                        e_short = acc_short / n;
                        e_over = acc_over / n;
                    }
                    const double avg = (h + f) * m + cost_fixed + spec.lambda_u * e_short +
                                       spec.lambda_o * e_over;
                    ++points;
                    if (avg < best) {
                        best = avg;
                        best_x = Allocation{m, {l1, l2}};
                    }
                }
            }
        }
    } else {
        const std::vector<double> l_grid = lattice(s, grid_step);
        OutflowSample xi;
        for (double l1 : l_grid) {
            for (double l2 : l_grid) {
                for (double l3 : l_grid) {
                    const double m_lo = std::max(0.0, s - l1 - l2 - l3);
                    const double m_hi = s - std::max({l1, l2, l3});
                    for (double m : m_grid) {
                        if (m < m_lo - 1e-9 || m > m_hi + 1e-9) continue;
                        Allocation x{m, {l1, l2, l3}};
                        double acc = 0.0;
                        for (std::size_t i = 0; i < u[0].size(); ++i) {
                            const double fill1 = std::min(u[0][i], l1);
                            const double fill2 = std::min(u[1][i], l2);
                            const double fill3 = std::min(u[2][i], l3);
                            const double filled = m + fill1 + fill2 + fill3;
                            acc += (h + f) * m - (h + spec.rebates_r[0]) * fill1 -
                                   (h + spec.rebates_r[1]) * fill2 -
                                   (h + spec.rebates_r[2]) * fill3 +
                                   spec.lambda_u * std::max(s - filled, 0.0) +
                                   spec.lambda_o * std::max(filled - s, 0.0);
                        }
                        ++points;
                        const double avg = acc / n;
                        if (avg < best) {
                            best = avg;
                            best_x = x;
                        }
                    }
                }
            }
        }
    }

    report.lattice_points = points;
    report.minimizer = best_x;

    // recompute mean and SE at the minimizer from the same batch
    double acc = 0.0;
    double acc_sq = 0.0;
    for (std::size_t i = 0; i < u[0].size(); ++i) {
        double filled = best_x.market_M;
        double cost = (h + f) * best_x.market_M;
        for (std::size_t k = 0; k < k_count; ++k) {
            const double fill = std::min(u[k][i], best_x.limits_L[k]);
            filled += fill;
            cost -= (h + spec.rebates_r[k]) * fill;
        }
        cost += spec.lambda_u * std::max(s - filled, 0.0) +
                spec.lambda_o * std::max(filled - s, 0.0);
        acc += cost;
        acc_sq += cost * cost;
    }
    report.objective = acc / n;
    const double var = std::max(0.0, (acc_sq - acc * acc / n) / (n - 1.0));
    report.objective_se = std::sqrt(var / n);
    return report;
}

bool overfill_predicate_two(const Allocation& x, const OutflowSample& xi,
                            const MarketSpec& spec) {
    if (spec.venues() != 2 || x.venues() != 2 || xi.xi.size() != 2) {
        throw std::invalid_argument("overfill_predicate_two: requires K=2");
    }
    const double s = spec.target_S;
    const double m = x.market_M;
    return xi.xi[0] > spec.queues_Q[0] + s - m - x.limits_L[1] &&
           xi.xi[1] > spec.queues_Q[1] + s - m - x.limits_L[0] &&
           xi.xi[0] + xi.xi[1] > spec.queues_Q[0] + spec.queues_Q[1] + s - m;
}

BatchEval evaluate_on_rows(const Allocation& x, const MarketSpec& spec,
                           const std::vector<OutflowSample>& rows) {
    double acc = 0.0;
    double acc_sq = 0.0;
    for (const auto& xi : rows) {
        const double v = realized_cost(x, xi, spec);
        acc += v;
        acc_sq += v * v;
    }
    const double n = static_cast<double>(rows.size());
    BatchEval out;
    out.mean = acc / n;
    const double var = std::max(0.0, (acc_sq - acc * acc / n) / (n - 1.0));
    out.se = std::sqrt(var / n);
    return out;
}

BatchEval paired_difference(const Allocation& x_a, const Allocation& x_b, const MarketSpec& spec,
                            const std::vector<OutflowSample>& rows) {
    double acc = 0.0;
    double acc_sq = 0.0;
    for (const auto& xi : rows) {
        const double d = realized_cost(x_a, xi, spec) - realized_cost(x_b, xi, spec);
        acc += d;
        acc_sq += d * d;
    }
    const double n = static_cast<double>(rows.size());
    BatchEval out;
    out.mean = acc / n;
    const double var = std::max(0.0, (acc_sq - acc * acc / n) / (n - 1.0));
    out.se = std::sqrt(var / n);
    return out;
}

}  // namespace oplace
