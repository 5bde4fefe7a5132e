#include <doctest.h>

#include <algorithm>
#include <array>
#include <sstream>

#include "crashre/errors.hpp"
#include "crashre/posterior_report.hpp"
#include "crashre/trace_io.hpp"

using namespace crashre;

namespace {

const std::vector<double> kX{0.7, -0.2, 1.5, 0.3, 0.9, -1.1, 2.4, 0.0, 0.6, 1.2, -0.5, 0.8};
const std::vector<double> kY{0.4, 0.5, 1.1, -0.3, 0.2, 0.9, 1.7, 0.6, 0.35, 0.05, -0.8, 1.3};

Trace make_trace(const std::vector<double>& beta, double r_base) {
  Trace t({"lanes_right", "r", "phi[0]"});
  for (std::size_t i = 0; i < beta.size(); ++i) {
    const std::array<double, 3> row{beta[i], r_base + 0.01 * static_cast<double>(i), 0.0};
    t.append(row);
  }
  return t;
}

}  // namespace

TEST_CASE("quantile interpolation matches numpy linear") {
  auto sorted = kX;
  std::sort(sorted.begin(), sorted.end());
  CHECK(quantile_sorted(sorted, 0.3) == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(quantile_sorted(sorted, 0.0) == sorted.front());
  CHECK(quantile_sorted(sorted, 1.0) == sorted.back());
  CHECK_THROWS_AS(quantile_sorted(std::vector<double>{}, 0.5), SpecError);
}

TEST_CASE("pooled summary against numpy") {
  const std::vector<Trace> traces{make_trace(kX, 0.2), make_trace(kY, 0.3)};
  const auto s = summarize(traces);
  REQUIRE(s.size() == 2);  // phi[0] skipped
  CHECK(s[0].name == "lanes_right");
  CHECK(s[0].mean == doctest::Approx(0.525).epsilon(1e-14));
  CHECK(s[0].sd == doctest::Approx(0.8073036172560993).epsilon(1e-13));
  CHECK(s[0].q025 == doctest::Approx(-0.9275).epsilon(1e-13));
  CHECK(s[0].q975 == doctest::Approx(1.9975).epsilon(1e-13));
  CHECK(s[0].significant == false);
  CHECK(s[0].rhat.has_value());
  CHECK(s[1].name == "r");
  CHECK_FALSE(s[1].significant.has_value());
  CHECK(summarize(traces, true).size() == 3);
}

TEST_CASE("summary does not depend on chain order") {
  const std::vector<Trace> ab{make_trace(kX, 0.2), make_trace(kY, 0.3)};
  const std::vector<Trace> ba{make_trace(kY, 0.3), make_trace(kX, 0.2)};
  const auto s1 = summarize(ab);
  const auto s2 = summarize(ba);
  for (std::size_t k = 0; k < s1.size(); ++k) {
    CHECK(s1[k].mean == doctest::Approx(s2[k].mean).epsilon(1e-15));
    CHECK(s1[k].q025 == s2[k].q025);
    CHECK(s1[k].q975 == s2[k].q975);
  }
}

TEST_CASE("interval excluding zero is significant") {
  std::vector<double> pos(40);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = 1.0 + 0.01 * static_cast<double>(i);
  const std::vector<Trace> traces{make_trace(pos, 0.2)};
  const auto s = summarize(traces);
  CHECK(s[0].significant == true);
  CHECK_FALSE(s[0].rhat.has_value());  // single chain
  CHECK(is_positive_parameter("sigma2_phi"));
  CHECK_FALSE(is_positive_parameter("intercept"));
}

TEST_CASE("report renders in three formats and JSON round trips") {
  const std::vector<Trace> traces{make_trace(kX, 0.2), make_trace(kY, 0.3)};
  const auto s = summarize(traces);
  const auto text = render_report(s, ReportFormat::kText);
  CHECK(text.find("lanes_right") != std::string::npos);
  CHECK(text.find(" ns ") != std::string::npos);
  const auto csv = render_report(s, ReportFormat::kCsv);
  CHECK(csv.rfind("variable,mean,sd,q2.5,q97.5,significant,rhat,ess\n", 0) == 0);
  CHECK(csv.find("lanes_right,0.52500000000000002,") != std::string::npos);
  const auto back = parse_report_json(render_report(s, ReportFormat::kJson));
  CHECK(back == s);
}

TEST_CASE("format names") {
  CHECK(parse_report_format("csv") == ReportFormat::kCsv);
  CHECK(parse_report_format("json") == ReportFormat::kJson);
  CHECK(parse_report_format("text") == ReportFormat::kText);
  CHECK_THROWS_AS(parse_report_format("xml"), UsageError);
}

TEST_CASE("empty or mismatched input is an error") {
  CHECK_THROWS_AS(summarize(std::vector<Trace>{}), SpecError);
  const std::vector<Trace> mixed{make_trace(kX, 0.2), Trace({"other"})};
  CHECK_THROWS_AS(summarize(mixed), SpecError);
}

TEST_CASE("trace CSV round trip is exact") {
  const auto t = make_trace(kX, 0.123456789012345678);
  std::ostringstream out;
  write_trace_csv(out, t);
  const auto back = parse_trace_csv(out.str(), "memory");
  CHECK(back == t);
  CHECK(format_double(0.1) == "0.10000000000000001");
}
