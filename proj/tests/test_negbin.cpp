#include <doctest.h>

#include <cmath>
#include <vector>

#include "crashre/errors.hpp"
#include "crashre/negbin.hpp"

using namespace crashre;

namespace {

double poisson_log_pmf(std::int64_t y, double mu) {
  return static_cast<double>(y) * std::log(mu) - mu - std::lgamma(static_cast<double>(y) + 1.0);
}

double direct_pmf(std::int64_t y, double mu, double r) {
  // Gamma(y + r) / (Gamma(r) y!) as a finite product for small y.
  double coef = 1.0;
  for (std::int64_t k = 0; k < y; ++k) coef *= (r + static_cast<double>(k)) / (k + 1.0);
  const double p = r / (r + mu);
  return coef * std::pow(p, r) * std::pow(1.0 - p, static_cast<double>(y));
}

}  // namespace

TEST_CASE("log pmf matches a 40-digit reference") {
  // mpmath at 40 digits, cross-checked with scipy.stats.nbinom.logpmf.
  CHECK(nb_log_pmf(5, {3.2, 0.2319}) == doctest::Approx(-3.5964939267067988).epsilon(1e-14));
}

TEST_CASE("pmf equals the direct product form for small y") {
  for (double mu : {0.1, 1.0, 5.0, 20.0, 50.0}) {
    for (double r : {0.05, 0.2319, 1.0, 10.0, 100.0}) {
      for (std::int64_t y = 0; y <= 5; ++y) {
        const double want = direct_pmf(y, mu, r);
        CHECK(std::exp(nb_log_pmf(y, {mu, r})) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("zero count has closed form") {
  CHECK(nb_log_pmf(0, {2.0, 3.0}) == doctest::Approx(3.0 * std::log(3.0 / 5.0)));
}

TEST_CASE("large size converges to Poisson") {
  for (double mu : {0.5, 2.0, 10.0}) {
    for (std::int64_t y = 0; y <= 20; ++y) {
      CHECK(std::abs(nb_log_pmf(y, {mu, 1e8}) - poisson_log_pmf(y, mu)) < 1e-4);
    }
  }
}

TEST_CASE("support sum plus analytic tail is one and mean identity holds") {
  for (double mu : {0.1, 1.0, 5.0, 20.0, 50.0}) {
    for (double r : {0.05, 0.2319, 1.0, 10.0, 100.0}) {
      const double sd = std::sqrt(mu + mu * mu / r);
      const auto ymax = static_cast<std::int64_t>(mu + 20.0 * sd + 50.0);
      double mass = 0.0;
      for (std::int64_t y = 0; y <= ymax; ++y) mass += std::exp(nb_log_pmf(y, {mu, r}));
      const double tail = 1.0 - nb_cdf(ymax, {mu, r});
      CHECK(std::abs(mass + tail - 1.0) < 1e-8);
      CHECK(nb_cdf(ymax, {mu, r}) == doctest::Approx(mass).epsilon(1e-10));
    }
  }
  // The mean identity needs a longer support for the heavy-tailed cases.
  for (double mu : {0.1, 1.0, 5.0, 20.0, 50.0}) {
    for (double r : {1.0, 10.0, 100.0}) {
      double mean = 0.0;
      for (std::int64_t y = 0; y <= 5000; ++y) {
        mean += static_cast<double>(y) * std::exp(nb_log_pmf(y, {mu, r}));
      }
      CHECK(mean == doctest::Approx(mu).epsilon(1e-6));
    }
  }
}

TEST_CASE("cdf is monotone, zero below the support") {
  NBParams p{7.5, 0.8};
  CHECK(nb_cdf(-1, p) == 0.0);
  double prev = 0.0;
  double acc = 0.0;
  for (std::int64_t y = 0; y < 60; ++y) {
    const double c = nb_cdf(y, p);
    acc += std::exp(nb_log_pmf(y, p));
    CHECK(c >= prev);
    CHECK(c == doctest::Approx(acc).epsilon(1e-12));
    prev = c;
  }
}

TEST_CASE("invalid parameters are domain errors") {
  CHECK_THROWS_AS(nb_log_pmf(1, {0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(nb_log_pmf(1, {1.0, -2.0}), DomainError);
  CHECK_THROWS_AS(nb_log_pmf(1, {std::nan(""), 1.0}), DomainError);
  Rng rng(1);
  CHECK_THROWS_AS(nb_sample({1.0, 0.0}, rng), DomainError);
}

TEST_CASE("Poisson-limit sample mean") {
  Rng rng(11);
  const int n = 100000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(nb_sample({4.0, 1e8}, rng));
  const double mean = sum / n;
  CHECK(std::abs(mean - 4.0) < 3.0 * std::sqrt(4.0 / n));
}

TEST_CASE("overdispersed sample variance") {
  Rng rng(12);
  const int n = 100000;
  std::vector<double> y(n);
  double sum = 0;
  for (auto& v : y) {
    v = static_cast<double>(nb_sample({3.2, 0.2319}, rng));
    sum += v;
  }
  const double mean = sum / n;
  double ss = 0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double var = ss / (n - 1);
  const double want = NBParams{3.2, 0.2319}.variance();
  CHECK(want == doctest::Approx(47.357).epsilon(1e-4));
  CHECK(std::abs(var - want) / want < 0.05);
}

TEST_CASE("sampling is deterministic per seed") {
  Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) CHECK(nb_sample({2.5, 0.7}, a) == nb_sample({2.5, 0.7}, b));
}

TEST_CASE("log_gamma agrees with lgamma") {
  for (double x : {0.001, 0.5, 1.0, 2.5, 10.0, 171.3, 1e6}) {
    CHECK(log_gamma(x) == doctest::Approx(std::lgamma(x)).epsilon(1e-15));
  }
}
