#include "oplace/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace oplace {

namespace {

constexpr int kMaxIter = 1000000;
constexpr double kEps = 1e-16;
constexpr double kFpMin = 1e-300;

// Series for P(a,x), x < a+1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a,x), x >= a+1.
double gamma_q_cf(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kFpMin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = b + an / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: need a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double poisson_cdf(double k, double lambda) {
    if (lambda <= 0.0) throw std::invalid_argument("poisson_cdf: lambda must be positive");
    const double kf = std::floor(k);
    if (kf < 0.0) return 0.0;
    return gamma_q(kf + 1.0, lambda);
}

double poisson_sf(double k, double lambda) {
    if (lambda <= 0.0) throw std::invalid_argument("poisson_sf: lambda must be positive");
    const double kf = std::floor(k);
    if (kf < 0.0) return 1.0;
    return gamma_p(kf + 1.0, lambda);
}

double poisson_logpmf(double k, double lambda) {
    if (k < 0.0) return -std::numeric_limits<double>::infinity();
    return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

double poisson_quantile(double p, double lambda) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("poisson_quantile: p must be in (0,1)");
    if (lambda <= 0.0) throw std::invalid_argument("poisson_quantile: lambda must be positive");
    double hi = std::ceil(lambda + 10.0 * std::sqrt(lambda) + 10.0);
    while (poisson_cdf(hi, lambda) < p) hi *= 2.0;
    if (poisson_cdf(0.0, lambda) >= p) return 0.0;
    double lo = 0.0;  // invariant: cdf(lo) < p <= cdf(hi)
    while (hi - lo > 1.0) {
        const double mid = std::floor((lo + hi) / 2.0);
        if (poisson_cdf(mid, lambda) >= p) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

double binomial_se(double p_hat, long n) {
    if (n <= 0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
}

bool approx_leq(double a, double b, double rel_tol) {
    return a <= b + rel_tol * std::max({std::fabs(a), std::fabs(b), 1.0});
}

}  // namespace oplace
