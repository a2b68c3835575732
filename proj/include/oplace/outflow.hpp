#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oplace/market.hpp"

namespace oplace {

enum class OutflowKind { exponential, pareto, poisson, factor, empirical };

std::string to_string(OutflowKind kind);

// Distribution family for the per-venue queue outflows xi over one horizon.
// The horizon T is a label that scales the distribution: all kinds have
// per-venue mean means[k] * horizon_T.
//
// factor kind (two or more venues): xi_k = alpha*xi_0 + (1-alpha)*eps_k with
// xi_0 ~ Pois(mu_bar*T), eps_k ~ Pois((means[k] - alpha*mu_bar)*T/(1-alpha))
// and mu_bar the mean of means[]. With equal venue means this reduces to the
// single-mu model (xi_0, eps_k all Pois(mu*T)); unequal means keep E[xi_k] =
// means[k]*T and require means[k] >= alpha*mu_bar.
struct OutflowModel {
    OutflowKind kind = OutflowKind::poisson;
    std::vector<double> means;  // shares per unit horizon, one per venue
    double horizon_T = 1.0;
    double pareto_tail = 0.0;   // tail index a > 1; scale x_m = mean*(a-1)/a
    double factor_alpha = 0.0;  // correlation weight in [0,1]
    double factor_mu0 = 0.0;    // common-factor mean; 0 = average of venue means

    // empirical kind: stored sample rows (width K) plus optional feature
    // columns carried for bucketing.
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<double>> features;
    std::vector<std::string> feature_names;

    std::size_t venues() const;
    double mean_of(std::size_t venue) const;  // means[venue] * horizon_T
    std::string descriptor() const;

    // True when the venue marginals are independent by construction, which
    // the two-exchange solver requires.
    bool independent_marginals() const;

    // Throws on invalid parameters (nonpositive means, tail <= 1, alpha
    // outside [0,1], empty empirical rows, ...).
    void validate() const;

    static OutflowModel make_exponential(std::vector<double> means, double horizon = 1.0);
    static OutflowModel make_pareto(std::vector<double> means, double tail_index,
                                    double horizon = 1.0);
    static OutflowModel make_poisson(std::vector<double> means, double horizon = 1.0);
    static OutflowModel make_factor(std::vector<double> means, double alpha,
                                    double horizon = 1.0);
    static OutflowModel make_empirical(std::vector<std::vector<double>> rows);

    // Fills out[0..K) with the draws of one row; every (seed, purpose, row,
    // venue) tuple owns its stream, so batches are reproducible and
    // partitionable (see rng.hpp).
    void draw_row(std::uint64_t seed, std::uint64_t purpose, long row,
                  std::vector<double>& out) const;
};

struct SampleBatch {
    std::vector<OutflowSample> rows;
    std::uint64_t seed = 0;
    std::string model_descriptor;
};

SampleBatch sample(const OutflowModel& model, std::uint64_t seed, long count);

// Marginal cdf F_k(x), survival 1 - F_k(x) (computed directly so deep tails
// keep relative precision), and the generalized inverse quantile
// min{q : F_k(q) >= p}.
double cdf(const OutflowModel& model, std::size_t venue, double x);
double survival(const OutflowModel& model, std::size_t venue, double x);
double quantile(const OutflowModel& model, std::size_t venue, double p);

// Reads the empirical CSV format: header "xi_1,..,xi_K[,feature columns]",
// '#' comment lines skipped, numeric fields, nonnegative outflows. Parse
// failures report the line number.
OutflowModel load_empirical(const std::string& path, std::size_t venue_count);

// K=1 model with the marginal distribution of one venue (factor models keep
// their common-factor mean so the marginal is exact even with unequal venue
// means).
OutflowModel venue_marginal(const OutflowModel& model, std::size_t venue);

// Row-source abstraction the solver/evaluator loops run on; lets experiment
// code plug in derived samplers (e.g. the consolidated-exchange sum) without
// widening the model family.
struct RowSource {
    virtual ~RowSource() = default;
    virtual std::size_t venues() const = 0;
    virtual void draw_row(std::uint64_t seed, std::uint64_t purpose, long row,
                          std::vector<double>& out) const = 0;
};

struct ModelRowSource final : RowSource {
    explicit ModelRowSource(const OutflowModel& model) : model_(&model) {}
    std::size_t venues() const override { return model_->venues(); }
    void draw_row(std::uint64_t seed, std::uint64_t purpose, long row,
                  std::vector<double>& out) const override {
        model_->draw_row(seed, purpose, row, out);
    }

  private:
    const OutflowModel* model_;
};

}  // namespace oplace
