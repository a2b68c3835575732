#include "oplace/rng.hpp"

#include <cmath>

namespace oplace {

namespace {

// Hoermann's PTRS transformed-rejection sampler. O(1) per draw, valid for
// lambda >= 10.
double poisson_ptrs(Rng& rng, double lambda) {
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= vr) return k;
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            k * loglam - lambda - std::lgamma(k + 1.0)) {
            return k;
        }
    }
}

double poisson_mult(Rng& rng, double lambda) {
    const double enlam = std::exp(-lambda);
    double prod = 1.0;
    double k = 0.0;
    for (;;) {
        prod *= rng.uniform();
        if (prod <= enlam) return k;
        k += 1.0;
    }
}

}  // namespace

double Rng::poisson(double lambda) {
    if (lambda <= 0.0) return 0.0;
    if (lambda >= 10.0) return poisson_ptrs(*this, lambda);
    return poisson_mult(*this, lambda);
}

}  // namespace oplace
