#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include <json.hpp>

#include "crashre/diagnostics.hpp"
#include "crashre/errors.hpp"
#include "crashre/rng.hpp"

using namespace crashre;

namespace {

using Spans = std::vector<std::span<const double>>;

std::vector<double> ar1(double rho, std::size_t n, std::uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, std::sqrt(1 - rho * rho));
  std::vector<double> x(n);
  double v = 0.0;
  for (auto& e : x) {
    v = rho * v + z(rng);
    e = v + shift;
  }
  return x;
}

Trace two_column_trace(const std::vector<double>& a, const std::vector<double>& b) {
  Trace t({"intercept", "phi[0]"});
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::array<double, 2> row{a[i], b[i]};
    t.append(row);
  }
  return t;
}

}  // namespace

TEST_CASE("classic Rhat against a numpy reference") {
  const std::vector<double> a{1, 2, 3, 4, 5, 6};
  const std::vector<double> b{2, 4, 4, 5, 6, 9};
  const Spans chains{a, b};
  CHECK(gelman_rubin(chains) == doctest::Approx(1.0395124244500786).epsilon(1e-14));
}

TEST_CASE("split Rhat halves each chain") {
  const std::vector<double> c{1, 3, 2, 5, 4, 6, 5, 8};
  const std::vector<double> d{2, 2, 3, 3, 7, 6, 6, 9};
  const Spans chains{c, d};
  CHECK(gelman_rubin(chains) == doctest::Approx(0.9466173130412298).epsilon(1e-14));
  CHECK(gelman_rubin(chains, RhatVariant::kSplit) ==
        doctest::Approx(1.7828548534783837).epsilon(1e-14));
}

TEST_CASE("identical chains give sqrt((n-1)/n)") {
  const std::vector<double> a{0.3, 1.2, -0.7, 2.2, 0.1};
  const Spans chains{a, a};
  CHECK(gelman_rubin(chains) == doctest::Approx(std::sqrt(4.0 / 5.0)).epsilon(1e-15));
}

TEST_CASE("Rhat separates mixed from stuck chains") {
  const auto a = ar1(0.5, 5000, 1);
  const auto b = ar1(0.5, 5000, 2);
  const auto shifted = ar1(0.5, 5000, 3, 3.0);
  CHECK(gelman_rubin(Spans{a, b}) < 1.01);
  CHECK(gelman_rubin(Spans{a, shifted}) > 1.1);
}

TEST_CASE("Rhat shape errors") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{1, 2, 3, 4};
  const std::vector<double> flat(6, 1.0);
  CHECK_THROWS_AS(gelman_rubin(Spans{a}), SpecError);
  CHECK_THROWS_AS(gelman_rubin(Spans{a, b}), SpecError);
  CHECK_THROWS_AS(gelman_rubin(Spans{flat, flat}), DegenerateChainError);
}

TEST_CASE("ESS against a numpy reference") {
  std::vector<double> x(500), y(500);
  for (std::size_t i = 0; i < 500; ++i) {
    const double t = static_cast<double>(i);
    x[i] = std::sin(0.3 * t) + 0.5 * std::cos(1.7 * t);
    y[i] = std::sin(0.05 * t) + std::cos(2.9 * t);
  }
  CHECK(effective_sample_size(x).ess == doctest::Approx(93.35917897876905).epsilon(1e-10));
  CHECK(effective_sample_size(y).ess == doctest::Approx(24.40104644434981).epsilon(1e-10));
}

TEST_CASE("ESS of AR(1) chains matches n(1-rho)/(1+rho)") {
  const std::size_t n = 40000;
  for (double rho : {0.0, 0.5, 0.9}) {
    const auto x = ar1(rho, n, 10);
    const double want = static_cast<double>(n) * (1 - rho) / (1 + rho);
    CHECK(std::abs(effective_sample_size(x).ess / want - 1.0) < 0.15);
  }
}

TEST_CASE("anticorrelated trace is capped at n") {
  std::vector<double> x(100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? 1.0 : -1.0;
  x[7] = 0.5;
  const auto e = effective_sample_size(x);
  CHECK(e.ess == 100.0);
  CHECK(e.capped);
}

TEST_CASE("ESS input errors") {
  const std::vector<double> shortish(9, 1.0);
  const std::vector<double> flat(50, 2.0);
  CHECK_THROWS_AS(effective_sample_size(shortish), SpecError);
  CHECK_THROWS_AS(effective_sample_size(flat), DegenerateChainError);
}

TEST_CASE("multi-chain ESS sums chains") {
  const auto a = ar1(0.5, 2000, 4);
  const auto b = ar1(0.5, 2000, 5);
  CHECK(effective_sample_size(Spans{a, b}).ess ==
        doctest::Approx(effective_sample_size(a).ess + effective_sample_size(b).ess));
}

TEST_CASE("diagnose flags and skips phi columns") {
  const std::vector<Trace> traces{two_column_trace(ar1(0.95, 300, 6), ar1(0.1, 300, 7)),
                                  two_column_trace(ar1(0.95, 300, 8, 2.0), ar1(0.1, 300, 9))};
  const std::vector<CoordinateAcceptance> acc{{"intercept", {0.41, 0.45}}};
  const std::vector<std::vector<double>> phi_means{{0.1, -0.1}, {0.2, 0.0}};
  const auto report = diagnose(traces, acc, phi_means);
  REQUIRE(report.parameters.size() == 1);
  CHECK(report.parameters[0].rhat_high);
  CHECK(report.parameters[0].ess_low);
  CHECK(report.any_rhat_high());
  CHECK(*report.phi_mean_average == doctest::Approx(0.05));

  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j["any_rhat_high"] == true);
  CHECK(j["rhat_threshold"] == 1.1);
  CHECK(j["parameters"][0]["name"] == "intercept");
  CHECK(report.to_text().find("Rhat>1.1") != std::string::npos);

  const auto with_phi = diagnose(traces, {}, {}, RhatVariant::kSplit, true);
  CHECK(with_phi.parameters.size() == 2);
  CHECK(with_phi.variant == RhatVariant::kSplit);
}

TEST_CASE("constant column is noted, not fatal") {
  Trace t({"r"});
  for (int i = 0; i < 20; ++i) {
    const std::array<double, 1> row{3.0};
    t.append(row);
  }
  const std::vector<Trace> traces{t, t};
  const auto report = diagnose(traces);
  REQUIRE(report.parameters.size() == 1);
  CHECK_FALSE(report.parameters[0].rhat.has_value());
  CHECK(report.parameters[0].note.find("degenerate") != std::string::npos);
}
