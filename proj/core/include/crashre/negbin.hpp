#ifndef CRASHRE_NEGBIN_HPP_
#define CRASHRE_NEGBIN_HPP_

#include <cstdint>

#include "crashre/rng.hpp"

namespace crashre {

// Negative binomial in mean/size form (NB2): E[y] = mean,
// Var[y] = mean + mean^2 / size, success probability size / (size + mean).
struct NBParams {
  double mean = 1.0;
  double size = 1.0;

  double variance() const { return mean + mean * mean / size; }
};

// Thread-safe log-gamma (std::lgamma writes the global `signgam`).
double log_gamma(double x);

// ln P(Y = y). Throws DomainError unless mean > 0 and size > 0.
double nb_log_pmf(std::int64_t y, NBParams p);

// P(Y <= y); 0 for y < 0.
double nb_cdf(std::int64_t y, NBParams p);

// Gamma-Poisson mixture draw: lambda ~ Gamma(size, mean/size), y ~ Poisson(lambda).
std::int64_t nb_sample(NBParams p, Rng& rng);

}  // namespace crashre

#endif  // CRASHRE_NEGBIN_HPP_
