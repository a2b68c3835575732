#pragma once

namespace oplace {

// Regularized incomplete gamma functions, P(a,x) lower and Q(a,x) upper,
// P + Q = 1. Series expansion below a+1, Lentz continued fraction above;
// accurate in both tails (needed for survival probabilities ~1e-44 that a
// 1 - cdf round trip would destroy).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Poisson distribution with mean lambda.
// cdf(k) = P(X <= floor(k)) = Q(floor(k)+1, lambda); sf(k) = P(X > floor(k)).
double poisson_cdf(double k, double lambda);
double poisson_sf(double k, double lambda);
double poisson_logpmf(double k, double lambda);
// Generalized inverse: smallest integer q with cdf(q) >= p, p in (0,1).
double poisson_quantile(double p, double lambda);

// Standard error of a proportion estimate from n Bernoulli samples.
double binomial_se(double p_hat, long n);

inline constexpr double kZ95 = 1.959963984540054;  // two-sided 95% normal quantile

// a <= b up to relative slack; used to classify solver regimes on computed
// CDF values (spec'd tolerance 1e-12).
bool approx_leq(double a, double b, double rel_tol = 1e-12);

}  // namespace oplace
