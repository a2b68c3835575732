#include "oplace/outflow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "oplace/errors.hpp"
#include "oplace/rng.hpp"
#include "oplace/stats.hpp"

namespace oplace {

namespace {

// venue tag used for the shared factor draw; venue streams use 0..K-1
constexpr std::uint64_t kFactorTag = 0xFAC707ull;
constexpr std::uint64_t kEmpiricalTag = 0xE39127ull;

double factor_mu_bar(const OutflowModel& m) {
    if (m.factor_mu0 > 0.0) return m.factor_mu0;
    return std::accumulate(m.means.begin(), m.means.end(), 0.0) /
           static_cast<double>(m.means.size());
}

// idiosyncratic Poisson mean for venue k (alpha < 1)
double factor_eps_mean(const OutflowModel& m, std::size_t k) {
    const double mu_bar = factor_mu_bar(m);
    return (m.means[k] - m.factor_alpha * mu_bar) * m.horizon_T / (1.0 - m.factor_alpha);
}

double pareto_scale(double mean, double tail) { return mean * (tail - 1.0) / tail; }

// Marginal cdf/sf of alpha*xi0 + (1-alpha)*eps for alpha in (0,1): condition
// on xi0 = j and sum over the effective Poisson support. The inner Poisson
// cdf/sf values are built once per call by pmf recurrence from a single
// incomplete-gamma anchor, so a call is O(window) cheap operations.
double factor_marginal(const OutflowModel& m, std::size_t venue, double x, bool want_sf) {
    const double lam0 = factor_mu_bar(m) * m.horizon_T;
    const double lame = factor_eps_mean(m, venue);
    const double alpha = m.factor_alpha;
    const double width0 = 15.0 * std::sqrt(lam0) + 30.0;
    const long j_lo = static_cast<long>(std::max(0.0, std::floor(lam0 - width0)));
    const long j_hi = static_cast<long>(std::ceil(lam0 + width0));

    // inner integer arguments k_j = floor((x - alpha j)/(1-alpha)) span a
    // contiguous range; tabulate F/SF over it
    const auto arg_of = [&](long j) {
        return std::floor((x - alpha * static_cast<double>(j)) / (1.0 - alpha));
    };
    const double k_at_lo = arg_of(j_lo);
    const double k_at_hi = arg_of(j_hi);
    long k_min = static_cast<long>(std::min(k_at_lo, k_at_hi));
    long k_max = static_cast<long>(std::max(k_at_lo, k_at_hi));
    const double widthe = 15.0 * std::sqrt(lame) + 30.0;
    const long k_floor = -1;
    const long k_ceil = static_cast<long>(std::ceil(lame + widthe));
    k_min = std::max(k_min, k_floor);
    k_max = std::min(k_max, k_ceil);

    std::vector<double> table;  // cdf or sf at k_min..k_max
    if (k_max >= k_min) {
        table.resize(static_cast<std::size_t>(k_max - k_min) + 1);
        if (want_sf) {
            double sf = poisson_sf(static_cast<double>(k_max), lame);
            table.back() = sf;
            for (long k = k_max; k > k_min; --k) {
                sf += std::exp(poisson_logpmf(static_cast<double>(k), lame));
                table[static_cast<std::size_t>(k - 1 - k_min)] = std::min(sf, 1.0);
            }
        } else {
            double cdf_v = poisson_cdf(static_cast<double>(k_min), lame);
            table.front() = cdf_v;
            for (long k = k_min + 1; k <= k_max; ++k) {
                cdf_v += std::exp(poisson_logpmf(static_cast<double>(k), lame));
                table[static_cast<std::size_t>(k - k_min)] = std::min(cdf_v, 1.0);
            }
        }
    }

    const auto inner = [&](long j) {
        const double y = arg_of(j);
        if (y < 0.0) return want_sf ? 1.0 : 0.0;
        long k = static_cast<long>(y);
        if (k > k_ceil) return want_sf ? 0.0 : 1.0;
        k = std::min(std::max(k, k_min), k_max);
        return table[static_cast<std::size_t>(k - k_min)];
    };

    // outer pmf by recurrence from a single log anchor
    double acc = 0.0;
    double logp = poisson_logpmf(static_cast<double>(j_lo), lam0);
    const double loglam0 = std::log(lam0);
    for (long j = j_lo; j <= j_hi; ++j) {
        acc += std::exp(logp) * inner(j);
        logp += loglam0 - std::log(static_cast<double>(j + 1));
    }
    return std::min(acc, 1.0);
}

}  // namespace

std::string to_string(OutflowKind kind) {
    switch (kind) {
        case OutflowKind::exponential: return "exponential";
        case OutflowKind::pareto: return "pareto";
        case OutflowKind::poisson: return "poisson";
        case OutflowKind::factor: return "factor";
        case OutflowKind::empirical: return "empirical";
    }
    return "?";
}

std::size_t OutflowModel::venues() const {
    if (kind == OutflowKind::empirical) return rows.empty() ? 0 : rows.front().size();
    return means.size();
}

double OutflowModel::mean_of(std::size_t venue) const {
    if (kind == OutflowKind::empirical) {
        double acc = 0.0;
        for (const auto& r : rows) acc += r[venue];
        return acc / static_cast<double>(rows.size());
    }
    return means[venue] * horizon_T;
}

std::string OutflowModel::descriptor() const {
    std::ostringstream os;
    os << to_string(kind) << "(K=" << venues();
    if (kind == OutflowKind::empirical) {
        os << ",rows=" << rows.size();
    } else {
        os << ",means=[";
        for (std::size_t k = 0; k < means.size(); ++k) os << (k ? "," : "") << means[k];
        os << "],T=" << horizon_T;
        if (kind == OutflowKind::pareto) os << ",tail=" << pareto_tail;
        if (kind == OutflowKind::factor) os << ",alpha=" << factor_alpha;
    }
    os << ")";
    return os.str();
}

bool OutflowModel::independent_marginals() const {
    switch (kind) {
        case OutflowKind::exponential:
        case OutflowKind::pareto:
        case OutflowKind::poisson: return true;
        case OutflowKind::factor: return factor_alpha == 0.0;
        case OutflowKind::empirical: return venues() == 1;
    }
    return false;
}

void OutflowModel::validate() const {
    if (!(horizon_T > 0.0)) throw std::invalid_argument("outflow model: horizon_T must be positive");
    if (kind == OutflowKind::empirical) {
        if (rows.empty()) throw std::invalid_argument("empirical model: need at least one row");
        const std::size_t k = rows.front().size();
        if (k == 0) throw std::invalid_argument("empirical model: rows must have width K >= 1");
        for (const auto& r : rows) {
            if (r.size() != k) throw std::invalid_argument("empirical model: ragged rows");
            for (double v : r) {
                if (!(v >= 0.0) || !std::isfinite(v)) {
                    throw std::invalid_argument("empirical model: outflows must be finite and >= 0");
                }
            }
        }
        return;
    }
    if (means.empty()) throw std::invalid_argument("outflow model: need K >= 1 venue means");
    for (double m : means) {
        if (!(m > 0.0) || !std::isfinite(m)) {
            throw std::invalid_argument("outflow model: venue means must be positive");
        }
    }
    if (kind == OutflowKind::pareto && !(pareto_tail > 1.0)) {
        throw std::invalid_argument("pareto model: tail index must exceed 1 (finite mean)");
    }
    if (kind == OutflowKind::factor) {
        if (!(factor_alpha >= 0.0 && factor_alpha <= 1.0)) {
            throw std::invalid_argument("factor model: alpha must lie in [0,1]");
        }
        if (factor_mu0 < 0.0) {
            throw std::invalid_argument("factor model: factor_mu0 must be >= 0");
        }
        if (factor_alpha < 1.0) {
            for (std::size_t k = 0; k < means.size(); ++k) {
                if (factor_eps_mean(*this, k) < 0.0) {
                    throw std::invalid_argument(
                        "factor model: means[k] must be >= alpha * common-factor mean");
                }
            }
        }
    }
}

OutflowModel OutflowModel::make_exponential(std::vector<double> means, double horizon) {
    OutflowModel m;
    m.kind = OutflowKind::exponential;
    m.means = std::move(means);
    m.horizon_T = horizon;
    m.validate();
    return m;
}

OutflowModel OutflowModel::make_pareto(std::vector<double> means, double tail_index,
                                       double horizon) {
    OutflowModel m;
    m.kind = OutflowKind::pareto;
    m.means = std::move(means);
    m.pareto_tail = tail_index;
    m.horizon_T = horizon;
    m.validate();
    return m;
}

OutflowModel OutflowModel::make_poisson(std::vector<double> means, double horizon) {
    OutflowModel m;
    m.kind = OutflowKind::poisson;
    m.means = std::move(means);
    m.horizon_T = horizon;
    m.validate();
    return m;
}

OutflowModel OutflowModel::make_factor(std::vector<double> means, double alpha, double horizon) {
    OutflowModel m;
    m.kind = OutflowKind::factor;
    m.means = std::move(means);
    m.factor_alpha = alpha;
    m.horizon_T = horizon;
    m.validate();
    return m;
}

OutflowModel OutflowModel::make_empirical(std::vector<std::vector<double>> rows) {
    OutflowModel m;
    m.kind = OutflowKind::empirical;
    m.rows = std::move(rows);
    m.validate();
    return m;
}

void OutflowModel::draw_row(std::uint64_t seed, std::uint64_t purpose, long row,
                            std::vector<double>& out) const {
    const std::size_t k_count = venues();
    out.resize(k_count);
    const auto row_tag = static_cast<std::uint64_t>(row);
    switch (kind) {
        case OutflowKind::exponential:
            for (std::size_t k = 0; k < k_count; ++k) {
                Rng rng(streams::derive(seed, {purpose, row_tag, k}));
                out[k] = rng.exponential(means[k] * horizon_T);
            }
            return;
        case OutflowKind::pareto:
            for (std::size_t k = 0; k < k_count; ++k) {
                Rng rng(streams::derive(seed, {purpose, row_tag, k}));
                out[k] = rng.pareto(pareto_scale(means[k] * horizon_T, pareto_tail), pareto_tail);
            }
            return;
        case OutflowKind::poisson:
            for (std::size_t k = 0; k < k_count; ++k) {
                Rng rng(streams::derive(seed, {purpose, row_tag, k}));
                out[k] = rng.poisson(means[k] * horizon_T);
            }
            return;
        case OutflowKind::factor: {
            const double alpha = factor_alpha;
            Rng rng0(streams::derive(seed, {purpose, row_tag, kFactorTag}));
            const double xi0 = rng0.poisson(factor_mu_bar(*this) * horizon_T);
            for (std::size_t k = 0; k < k_count; ++k) {
                if (alpha == 1.0) {
                    out[k] = xi0;
                } else {
                    Rng rng(streams::derive(seed, {purpose, row_tag, k}));
                    out[k] = alpha * xi0 + (1.0 - alpha) * rng.poisson(factor_eps_mean(*this, k));
                }
            }
            return;
        }
        case OutflowKind::empirical: {
            Rng rng(streams::derive(seed, {purpose, row_tag, kEmpiricalTag}));
            const auto idx = static_cast<std::size_t>(rng.uniform() *
                                                      static_cast<double>(rows.size()));
            const auto& src = rows[std::min(idx, rows.size() - 1)];
            std::copy(src.begin(), src.end(), out.begin());
            return;
        }
    }
}

SampleBatch sample(const OutflowModel& model, std::uint64_t seed, long count) {
    model.validate();
    if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
    SampleBatch batch;
    batch.seed = seed;
    batch.model_descriptor = model.descriptor();
    batch.rows.resize(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        model.draw_row(seed, streams::kBatch, i, batch.rows[static_cast<std::size_t>(i)].xi);
    }
    return batch;
}

double cdf(const OutflowModel& model, std::size_t venue, double x) {
    switch (model.kind) {
        case OutflowKind::exponential:
            return x < 0.0 ? 0.0 : 1.0 - std::exp(-x / model.mean_of(venue));
        case OutflowKind::pareto: {
            const double xm = pareto_scale(model.mean_of(venue), model.pareto_tail);
            return x < xm ? 0.0 : 1.0 - std::pow(xm / x, model.pareto_tail);
        }
        case OutflowKind::poisson:
            return poisson_cdf(x, model.mean_of(venue));
        case OutflowKind::factor: {
            if (model.factor_alpha == 0.0) return poisson_cdf(x, model.mean_of(venue));
            if (model.factor_alpha == 1.0) {
                return poisson_cdf(x, factor_mu_bar(model) * model.horizon_T);
            }
            return factor_marginal(model, venue, x, /*want_sf=*/false);
        }
        case OutflowKind::empirical: {
            long count = 0;
            for (const auto& r : model.rows) count += r[venue] <= x ? 1 : 0;
            return static_cast<double>(count) / static_cast<double>(model.rows.size());
        }
    }
    return 0.0;
}

double survival(const OutflowModel& model, std::size_t venue, double x) {
    switch (model.kind) {
        case OutflowKind::exponential:
            return x < 0.0 ? 1.0 : std::exp(-x / model.mean_of(venue));
        case OutflowKind::pareto: {
            const double xm = pareto_scale(model.mean_of(venue), model.pareto_tail);
            return x < xm ? 1.0 : std::pow(xm / x, model.pareto_tail);
        }
        case OutflowKind::poisson:
            return poisson_sf(x, model.mean_of(venue));
        case OutflowKind::factor: {
            if (model.factor_alpha == 0.0) return poisson_sf(x, model.mean_of(venue));
            if (model.factor_alpha == 1.0) {
                return poisson_sf(x, factor_mu_bar(model) * model.horizon_T);
            }
            return factor_marginal(model, venue, x, /*want_sf=*/true);
        }
        case OutflowKind::empirical:
            return 1.0 - cdf(model, venue, x);
    }
    return 1.0;
}

double quantile(const OutflowModel& model, std::size_t venue, double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("quantile: p must lie in the open interval (0,1)");
    }
    switch (model.kind) {
        case OutflowKind::exponential:
            return -model.mean_of(venue) * std::log1p(-p);
        case OutflowKind::pareto: {
            const double xm = pareto_scale(model.mean_of(venue), model.pareto_tail);
            return xm * std::pow(1.0 - p, -1.0 / model.pareto_tail);
        }
        case OutflowKind::poisson:
            return poisson_quantile(p, model.mean_of(venue));
        case OutflowKind::factor: {
            if (model.factor_alpha == 0.0) return poisson_quantile(p, model.mean_of(venue));
            if (model.factor_alpha == 1.0) {
                return poisson_quantile(p, factor_mu_bar(model) * model.horizon_T);
            }
            // generalized inverse by bisection, keeping cdf(hi) >= p > cdf(lo)
            double hi = model.mean_of(venue) + 20.0 * std::sqrt(model.mean_of(venue)) + 20.0;
            while (cdf(model, venue, hi) < p) hi *= 2.0;
            double lo = 0.0;
            if (cdf(model, venue, lo) >= p) return lo;
            while (hi - lo > 1e-9 * (1.0 + hi)) {
                const double mid = 0.5 * (lo + hi);
                if (cdf(model, venue, mid) >= p) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        case OutflowKind::empirical: {
            std::vector<double> vals;
            vals.reserve(model.rows.size());
            for (const auto& r : model.rows) vals.push_back(r[venue]);
            std::sort(vals.begin(), vals.end());
            const auto n = static_cast<double>(vals.size());
            const auto idx = static_cast<std::size_t>(std::ceil(p * n)) - 1;
            return vals[std::min(idx, vals.size() - 1)];
        }
    }
    return 0.0;
}

OutflowModel venue_marginal(const OutflowModel& model, std::size_t venue) {
    model.validate();
    if (venue >= model.venues()) throw std::invalid_argument("venue_marginal: venue out of range");
    OutflowModel out;
    out.kind = model.kind;
    out.horizon_T = model.horizon_T;
    switch (model.kind) {
        case OutflowKind::exponential:
        case OutflowKind::poisson:
            out.means = {model.means[venue]};
            break;
        case OutflowKind::pareto:
            out.means = {model.means[venue]};
            out.pareto_tail = model.pareto_tail;
            break;
        case OutflowKind::factor:
            out.means = {model.means[venue]};
            out.factor_alpha = model.factor_alpha;
            out.factor_mu0 = model.factor_mu0 > 0.0
                                 ? model.factor_mu0
                                 : std::accumulate(model.means.begin(), model.means.end(), 0.0) /
                                       static_cast<double>(model.means.size());
            break;
        case OutflowKind::empirical: {
            out.rows.reserve(model.rows.size());
            for (const auto& r : model.rows) out.rows.push_back({r[venue]});
            break;
        }
    }
    out.validate();
    return out;
}

OutflowModel load_empirical(const std::string& path, std::size_t venue_count) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_empirical: cannot open " + path);

    auto fail = [&](long line_no, const std::string& what) {
        std::ostringstream os;
        os << path << ":" << line_no << ": " << what;
        throw std::invalid_argument(os.str());
    };

    std::string line;
    long line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            field.erase(0, field.find_first_not_of(" \t\r"));
            field.erase(field.find_last_not_of(" \t\r") + 1);
            header.push_back(field);
        }
        break;
    }
    if (header.size() < venue_count) fail(line_no, "header has fewer columns than K");
    for (std::size_t k = 0; k < venue_count; ++k) {
        const std::string expect = "xi_" + std::to_string(k + 1);
        if (header[k] != expect) {
            fail(line_no, "expected header column '" + expect + "', found '" + header[k] + "'");
        }
    }

    OutflowModel m;
    m.kind = OutflowKind::empirical;
    m.feature_names.assign(header.begin() + static_cast<long>(venue_count), header.end());

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<double> vals;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(field, &pos);
                vals.push_back(v);
            } catch (const std::exception&) {
                fail(line_no, "not a number: '" + field + "'");
            }
        }
        if (vals.size() != header.size()) {
            std::ostringstream os;
            os << "expected " << header.size() << " fields, found " << vals.size();
            fail(line_no, os.str());
        }
        std::vector<double> xi(vals.begin(), vals.begin() + static_cast<long>(venue_count));
        for (double v : xi) {
            if (!(v >= 0.0)) fail(line_no, "outflow values must be nonnegative");
        }
        m.rows.push_back(std::move(xi));
        m.features.emplace_back(vals.begin() + static_cast<long>(venue_count), vals.end());
    }
    if (m.rows.empty()) {
        throw std::invalid_argument("load_empirical: " + path + " contains no sample rows");
    }
    m.validate();
    return m;
}

}  // namespace oplace
