#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oplace/analytic.hpp"
#include "oplace/market.hpp"
#include "oplace/outflow.hpp"
#include "oplace/sa.hpp"

namespace oplace {

// Out-of-sample average cost per share W(X) = sum v / (count * S), with a
// normal-approximation 95% confidence interval.
struct EvaluationResult {
    std::string label;
    double avg_cost_per_share = 0.0;  // mills/share
    double ci95_halfwidth = 0.0;      // mills/share
    double avg_filled = 0.0;          // shares
    long count = 0;
};

EvaluationResult evaluate(const Allocation& x, const MarketSpec& spec, const OutflowModel& model,
                          long count, std::uint64_t seed, const std::string& label = "",
                          int workers = 1);
EvaluationResult evaluate(const Allocation& x, const MarketSpec& spec, const RowSource& source,
                          long count, std::uint64_t seed, const std::string& label = "",
                          int workers = 1);

// The benchmark strategies: all-market, single-venue all-limit, equal split.
struct BenchmarkSet {
    Allocation X_M;
    Allocation X_L;
    Allocation X_E;
};

BenchmarkSet benchmark_allocations(const MarketSpec& spec);

// --- convergence study ---------------------------------------------------

struct ConvergenceRow {
    std::string x0_label;
    long iterations = 0;
    double objective = 0.0;      // V-hat(X-hat) on the held-out batch, mills
    double reference = 0.0;      // V-hat(X*) on the same batch
    double gap = 0.0;            // objective - reference
    double gap_rel = 0.0;        // gap / |reference|
    double gap_se = 0.0;         // paired SE of the gap
};

struct ConvergenceStudyConfig {
    std::vector<std::pair<std::string, Allocation>> starts;
    std::vector<long> iteration_grid;
    SAConfig base;             // seed/eval settings; X0 and N overridden per cell
    long holdout_count = 10000;
    std::uint64_t seed = 0;
};

// Reference X*: closed form for K=1, brute force otherwise (or caller-provided).
std::vector<ConvergenceRow> run_convergence_study(const MarketSpec& spec,
                                                  const OutflowModel& model,
                                                  const ConvergenceStudyConfig& cfg,
                                                  std::optional<Allocation> reference = {});

// --- sensitivity sweep ---------------------------------------------------

// parameter: lambda_u, lambda_o, h, f, S, alpha, or venue-indexed r_1.., Q_1..,
// mu_1.. . Paired seeds across the grid; every row carries the single-venue
// closed-form solution on venue 1 as the comparison series.
struct SweepRow {
    double value = 0.0;
    double M_hat = 0.0;
    std::vector<double> L_hat;
    double M_single = 0.0;
    double L_single = 0.0;
};

std::vector<SweepRow> run_sensitivity_sweep(const MarketSpec& spec, const OutflowModel& model,
                                            const std::string& parameter,
                                            const std::vector<double>& grid, const SAConfig& cfg);

// --- fragmentation study -------------------------------------------------

// Draws one row from an inner model and replaces it by the venue total;
// the consolidated exchange of the fragmentation study.
struct ConsolidatedRowSource final : RowSource {
    explicit ConsolidatedRowSource(const OutflowModel& model) : model_(&model) {}
    std::size_t venues() const override { return 1; }
    void draw_row(std::uint64_t seed, std::uint64_t purpose, long row,
                  std::vector<double>& out) const override;

  private:
    const OutflowModel* model_;
};

struct FragmentationRow {
    double alpha = 0.0;
    double M_hat = 0.0;
    double L1_hat = 0.0;
    double L2_hat = 0.0;
    double total = 0.0;
    double W_fragmented = 0.0;
    double W_fragmented_ci = 0.0;
    double W_consolidated = 0.0;
    double W_consolidated_ci = 0.0;
};

std::vector<FragmentationRow> run_fragmentation_study(const MarketSpec& spec,
                                                      const std::vector<double>& alphas,
                                                      double mu, const SAConfig& cfg,
                                                      long eval_count);

// --- benchmark table -----------------------------------------------------

struct BenchmarkTableRow {
    std::size_t venue_count = 0;
    double target = 0.0;
    std::vector<double> allocation_over_S;  // M first, venues after
    double W_market = 0.0;
    double W_limit = 0.0;
    double W_equal = 0.0;
    double W_solution = 0.0;
    double max_ci95 = 0.0;
};

struct BenchmarkTableParams {
    std::vector<std::size_t> venue_counts;
    std::vector<double> targets;
    double mu = 2200.0;
    double alpha = 0.6;
    long iterations_N = 1000;
    long eval_count = 1000;
    std::uint64_t seed = 0;
};

// Identical venues (shared rebate and queue from the K=1 template), factor
// outflows, SA started from the equal split; all four strategies evaluated on
// one fresh common batch per row.
std::vector<BenchmarkTableRow> run_benchmark_table(const MarketSpec& single_venue_template,
                                                   const BenchmarkTableParams& params);

// --- tercile bucketing ---------------------------------------------------

struct BucketKey {
    std::vector<int> terciles;  // one of 0/1/2 per feature

    std::string label() const;  // e.g. "L|M|H"
    bool operator<(const BucketKey& other) const { return terciles < other.terciles; }
    bool operator==(const BucketKey& other) const { return terciles == other.terciles; }
};

struct BucketEntry {
    BucketKey key;
    long row_count = 0;
    bool solved = false;  // false for thin buckets (< 3 rows), flagged, not fabricated
    Allocation allocation;
};

struct BucketSolveResult {
    std::vector<std::string> feature_names;
    std::vector<std::pair<double, double>> tercile_boundaries;  // per feature
    std::vector<BucketEntry> entries;                           // sorted by key
};

BucketSolveResult bucket_and_solve(const OutflowModel& empirical, const MarketSpec& spec,
                                   const SAConfig& cfg);

// --- CSV emission ----------------------------------------------------------

std::string to_csv(const std::vector<ConvergenceRow>& rows);
std::string to_csv(const std::vector<SweepRow>& rows, std::size_t venue_count,
                   const std::string& parameter);
std::string to_csv(const std::vector<FragmentationRow>& rows);
std::string to_csv(const std::vector<BenchmarkTableRow>& rows, std::size_t max_venues);
std::string to_csv(const BucketSolveResult& result);

}  // namespace oplace
