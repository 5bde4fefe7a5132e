#include "crashre/posterior_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "crashre/diagnostics.hpp"
#include "crashre/errors.hpp"
#include "crashre/trace_io.hpp"

namespace crashre {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw SpecError("quantile of an empty sample", "posterior_report");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

bool is_positive_parameter(std::string_view name) {
  return name == "r" || name == "sigma2_phi";
}

std::vector<PosteriorSummary> summarize(std::span<const Trace> traces, bool include_phi) {
  if (traces.empty()) throw SpecError("no traces to summarize", "posterior_report");
  const auto names = traces.front().names();
  std::size_t total = 0;
  for (const auto& t : traces) {
    if (!std::equal(names.begin(), names.end(), t.names().begin(), t.names().end())) {
      throw SpecError("traces disagree on parameter names", "posterior_report");
    }
    total += t.length();
  }
  if (total == 0) throw SpecError("traces hold no draws", "posterior_report");

  std::vector<PosteriorSummary> out;
  std::vector<double> pooled;
  pooled.reserve(total);
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (!include_phi && parse_phi_name(names[j])) continue;
    pooled.clear();
    std::vector<std::span<const double>> cols;
    for (const auto& t : traces) {
      cols.push_back(t.column(j));
      pooled.insert(pooled.end(), t.column(j).begin(), t.column(j).end());
    }
    // Sorting first makes the sums independent of chain order.
    std::sort(pooled.begin(), pooled.end());

    PosteriorSummary s;
    s.name = names[j];
    double sum = 0.0;
    for (double v : pooled) sum += v;
    s.mean = sum / static_cast<double>(pooled.size());
    double ss = 0.0;
    for (double v : pooled) ss += (v - s.mean) * (v - s.mean);
    s.sd = pooled.size() > 1 ? std::sqrt(ss / static_cast<double>(pooled.size() - 1)) : 0.0;
    s.q025 = quantile_sorted(pooled, 0.025);
    s.q975 = quantile_sorted(pooled, 0.975);
    if (!is_positive_parameter(s.name)) s.significant = s.q025 > 0 || s.q975 < 0;

    try {
      if (cols.size() >= 2 && cols.front().size() >= 4) s.rhat = gelman_rubin(cols);
      if (cols.front().size() >= 10) {
        s.ess = effective_sample_size(std::span<const std::span<const double>>(cols)).ess;
      }
    } catch (const Error&) {
      // Constant or too-short traces carry no diagnostic.
    }
    out.push_back(std::move(s));
  }
  return out;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "text" || name == "txt" || name == "table") return ReportFormat::kText;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  throw UsageError("unknown report format `" + std::string(name) + "` (text, csv or json)",
                   "posterior_report");
}

namespace {

std::string significance_cell(const PosteriorSummary& s, bool text) {
  if (!s.significant) return text ? "-" : "n/a";
  if (text) return *s.significant ? "yes" : "ns";
  return *s.significant ? "true" : "false";
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::string render_report(std::span<const PosteriorSummary> summaries, ReportFormat format) {
  if (summaries.empty()) throw SpecError("nothing to report", "posterior_report");
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kText: {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-26s %11s %10s %11s %11s %5s %7s %8s\n", "variable",
                    "mean", "sd", "q2.5", "q97.5", "sig", "Rhat", "ESS");
      out << buf;
      for (const auto& s : summaries) {
        char rhat[32] = "-";
        char ess[32] = "-";
        if (s.rhat) std::snprintf(rhat, sizeof rhat, "%.3f", *s.rhat);
        if (s.ess) std::snprintf(ess, sizeof ess, "%.0f", *s.ess);
        std::snprintf(buf, sizeof buf, "%-26s %11.4f %10.4f %11.4f %11.4f %5s %7s %8s\n",
                      s.name.c_str(), s.mean, s.sd, s.q025, s.q975,
                      significance_cell(s, true).c_str(), rhat, ess);
        out << buf;
      }
      break;
    }
    case ReportFormat::kCsv:
      out << "variable,mean,sd,q2.5,q97.5,significant,rhat,ess\n";
      for (const auto& s : summaries) {
        out << s.name << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ','
            << format_double(s.q025) << ',' << format_double(s.q975) << ','
            << significance_cell(s, false) << ',' << optional_cell(s.rhat) << ','
            << optional_cell(s.ess) << '\n';
      }
      break;
    case ReportFormat::kJson: {
      using nlohmann::ordered_json;
      ordered_json rows = ordered_json::array();
      for (const auto& s : summaries) {
        rows.push_back({{"variable", s.name},
                        {"mean", s.mean},
                        {"sd", s.sd},
                        {"q2.5", s.q025},
                        {"q97.5", s.q975},
                        {"significant", s.significant ? ordered_json(*s.significant)
                                                      : ordered_json(nullptr)},
                        {"rhat", s.rhat ? ordered_json(*s.rhat) : ordered_json(nullptr)},
                        {"ess", s.ess ? ordered_json(*s.ess) : ordered_json(nullptr)}});
      }
      out << rows.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

std::vector<PosteriorSummary> parse_report_json(std::string_view json) {
  const auto rows = nlohmann::json::parse(json);
  std::vector<PosteriorSummary> out;
  for (const auto& r : rows) {
    PosteriorSummary s;
    s.name = r.at("variable").get<std::string>();
    s.mean = r.at("mean").get<double>();
    s.sd = r.at("sd").get<double>();
    s.q025 = r.at("q2.5").get<double>();
    s.q975 = r.at("q97.5").get<double>();
    if (!r.at("significant").is_null()) s.significant = r.at("significant").get<bool>();
    if (!r.at("rhat").is_null()) s.rhat = r.at("rhat").get<double>();
    if (!r.at("ess").is_null()) s.ess = r.at("ess").get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace crashre
