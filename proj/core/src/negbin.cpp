#include "crashre/negbin.hpp"

#include <cmath>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "crashre/errors.hpp"

namespace crashre {

namespace {

void check(NBParams p) {
  if (!(p.mean > 0) || !std::isfinite(p.mean)) {
    throw DomainError("negative binomial mean must be positive and finite, got " +
                      std::to_string(p.mean));
  }
  if (!(p.size > 0) || !std::isfinite(p.size)) {
    throw DomainError("negative binomial size must be positive and finite, got " +
                      std::to_string(p.size));
  }
}

// ln Gamma(y + r) - ln Gamma(r) - ln y!
double log_binomial_coefficient(std::int64_t y, double r) {
  // Short products avoid the cancellation of two large lgamma values when
  // r is huge (the Poisson limit).
  if (y < 32) {
    double acc = 0.0;
    for (std::int64_t k = 0; k < y; ++k) {
      acc += std::log((r + static_cast<double>(k)) / static_cast<double>(k + 1));
    }
    return acc;
  }
  const double yd = static_cast<double>(y);
  return log_gamma(yd + r) - log_gamma(r) - log_gamma(yd + 1.0);
}

}  // namespace

double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double nb_log_pmf(std::int64_t y, NBParams p) {
  check(p);
  if (y < 0) return -INFINITY;
  const double r = p.size;
  const double mu = p.mean;
  // r ln(r/(r+mu)) + y ln(mu/(r+mu)), written with log1p for accuracy at
  // either extreme of mu/r.
  const double size_term = -r * std::log1p(mu / r);
  const double count_term = y == 0 ? 0.0 : -static_cast<double>(y) * std::log1p(r / mu);
  return log_binomial_coefficient(y, r) + size_term + count_term;
}

double nb_cdf(std::int64_t y, NBParams p) {
  check(p);
  if (y < 0) return 0.0;
  // P(Y <= y) = I_q(r, y + 1), q = r / (r + mu).
  const double q = p.size / (p.size + p.mean);
  return boost::math::ibeta(p.size, static_cast<double>(y) + 1.0, q);
}

std::int64_t nb_sample(NBParams p, Rng& rng) {
  check(p);
  std::gamma_distribution<double> gamma(p.size, p.mean / p.size);
  const double lambda = gamma(rng);
  if (!(lambda > 0)) return 0;
  std::poisson_distribution<std::int64_t> poisson(lambda);
  return poisson(rng);
}

}  // namespace crashre
