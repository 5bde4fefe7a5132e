#ifndef CRASHRE_POSTERIOR_REPORT_HPP_
#define CRASHRE_POSTERIOR_REPORT_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crashre/trace.hpp"

namespace crashre {

struct PosteriorSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;  // posterior sd of the pooled draws (n - 1 divisor)
  double q025 = 0.0;
  double q975 = 0.0;
  // Whether the 95% interval excludes zero; nullopt for the positive
  // parameters r and sigma2_phi where the test is meaningless.
  std::optional<bool> significant;
  std::optional<double> rhat;
  std::optional<double> ess;

  bool operator==(const PosteriorSummary&) const = default;
};

// Linear interpolation between closest ranks of sorted data:
// h = (n - 1) p, x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double quantile_sorted(std::span<const double> sorted, double p);

bool is_positive_parameter(std::string_view name);

// Pools all chains (order-invariant). Stored phi[i] columns are skipped
// unless include_phi. Rhat (classic) is attached with >= 2 chains.
std::vector<PosteriorSummary> summarize(std::span<const Trace> traces, bool include_phi = false);

enum class ReportFormat { kText, kCsv, kJson };
ReportFormat parse_report_format(std::string_view name);  // throws UsageError

// Columns: variable, mean, sd, q2.5, q97.5, significant, rhat, ess.
// Rows whose interval covers zero stay in the table with significant =
// false (text: "ns").
std::string render_report(std::span<const PosteriorSummary> summaries, ReportFormat format);

// Inverse of the JSON rendering.
std::vector<PosteriorSummary> parse_report_json(std::string_view json);

}  // namespace crashre

#endif  // CRASHRE_POSTERIOR_REPORT_HPP_
