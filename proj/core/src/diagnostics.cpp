#include "crashre/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "crashre/errors.hpp"

namespace crashre {

namespace {

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x, double mean) {
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / static_cast<double>(x.size() - 1);
}

double classic_rhat(std::span<const std::span<const double>> chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    w += variance_of(chains[c], means[c]);
  }
  w /= static_cast<double>(m);
  if (!(w > 0)) throw DegenerateChainError("within-chain variance is zero");
  const double b = static_cast<double>(n) * variance_of(means, mean_of(means));
  const double nd = static_cast<double>(n);
  // Written so identical chains (B = 0) give exactly sqrt((n-1)/n).
  return std::sqrt((nd - 1.0) / nd + b / (nd * w));
}

}  // namespace

double gelman_rubin(std::span<const std::span<const double>> chains, RhatVariant variant) {
  if (chains.size() < 2) throw SpecError("Rhat needs at least two chains", "diagnostics");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw SpecError("Rhat needs equal-length chains", "diagnostics");
  }
  if (n < 4) throw SpecError("Rhat needs at least 4 draws per chain", "diagnostics");
  if (variant == RhatVariant::kClassic) return classic_rhat(chains);

  const std::size_t half = n / 2;
  std::vector<std::span<const double>> halves;
  for (const auto& c : chains) {
    halves.push_back(c.subspan(n - 2 * half, half));
    halves.push_back(c.subspan(n - half, half));
  }
  if (half < 4) throw SpecError("split Rhat needs at least 8 draws per chain", "diagnostics");
  return classic_rhat(halves);
}

EssEstimate effective_sample_size(std::span<const double> trace) {
  const std::size_t n = trace.size();
  if (n < 10) throw SpecError("ESS needs at least 10 draws", "diagnostics");
  const double mean = mean_of(trace);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = trace[i] - mean;

  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0)) throw DegenerateChainError("trace is constant");

  // tau = -1 + 2 * sum_m Gamma_m, Gamma_m = rho_2m + rho_2m+1, rho_0 = 1.
  double pair_sum = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double rho_even = m == 0 ? 1.0 : autocov(2 * m) / c0;
    const double rho_odd = autocov(2 * m + 1) / c0;
    const double gamma = rho_even + rho_odd;
    if (gamma < 0) break;
    pair_sum += gamma;
  }
  const double tau = -1.0 + 2.0 * pair_sum;
  const double nd = static_cast<double>(n);
  if (!(tau > 1.0)) {
    // tau <= 1 means ESS >= n; report n and flag anything strictly above.
    return {nd, tau < 1.0};
  }
  return {nd / tau, false};
}

EssEstimate effective_sample_size(std::span<const std::span<const double>> chains) {
  EssEstimate total;
  for (const auto& c : chains) {
    const auto e = effective_sample_size(c);
    total.ess += e.ess;
    total.capped = total.capped || e.capped;
  }
  return total;
}

bool DiagnosticsReport::any_rhat_high() const {
  for (const auto& p : parameters) {
    if (p.rhat_high) return true;
  }
  return false;
}

bool DiagnosticsReport::any_ess_low() const {
  for (const auto& p : parameters) {
    if (p.ess_low) return true;
  }
  return false;
}

std::string DiagnosticsReport::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["rhat_variant"] = variant == RhatVariant::kClassic ? "classic" : "split";
  j["chains"] = chains;
  j["draws_per_chain"] = draws_per_chain;
  j["rhat_threshold"] = kRhatThreshold;
  j["ess_threshold"] = kEssThreshold;
  j["any_rhat_high"] = any_rhat_high();
  j["any_ess_low"] = any_ess_low();
  j["phi_mean_average"] = phi_mean_average ? ordered_json(*phi_mean_average) : ordered_json(nullptr);
  auto& params = j["parameters"] = ordered_json::array();
  for (const auto& p : parameters) {
    params.push_back({{"name", p.name},
                      {"rhat", p.rhat ? ordered_json(*p.rhat) : ordered_json(nullptr)},
                      {"ess", p.ess ? ordered_json(*p.ess) : ordered_json(nullptr)},
                      {"ess_capped", p.ess_capped},
                      {"rhat_high", p.rhat_high},
                      {"ess_low", p.ess_low},
                      {"note", p.note}});
  }
  auto& acc = j["acceptance"] = ordered_json::array();
  for (const auto& a : acceptance) acc.push_back({{"name", a.name}, {"per_chain", a.per_chain}});
  return j.dump(2);
}

std::string DiagnosticsReport::to_text() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-26s %10s %10s  %s\n", "parameter", "Rhat", "ESS", "flags");
  out << buf;
  for (const auto& p : parameters) {
    std::string flags;
    if (p.rhat_high) flags += " Rhat>1.1";
    if (p.ess_low) flags += " ESS<400";
    if (p.ess_capped) flags += " ESS-capped";
    if (!p.note.empty()) flags += " (" + p.note + ")";
    const std::string rhat = p.rhat ? std::to_string(*p.rhat).substr(0, 6) : "-";
    const std::string ess = p.ess ? std::to_string(static_cast<long long>(std::llround(*p.ess))) : "-";
    std::snprintf(buf, sizeof buf, "%-26s %10s %10s %s\n", p.name.c_str(), rhat.c_str(),
                  ess.c_str(), flags.c_str());
    out << buf;
  }
  if (!acceptance.empty()) {
    out << "\nacceptance (post burn-in, per chain)\n";
    for (const auto& a : acceptance) {
      if (parse_phi_name(a.name)) continue;
      std::snprintf(buf, sizeof buf, "%-26s", a.name.c_str());
      out << buf;
      for (double v : a.per_chain) {
        std::snprintf(buf, sizeof buf, " %6.3f", v);
        out << buf;
      }
      out << '\n';
    }
  }
  if (phi_mean_average) {
    std::snprintf(buf, sizeof buf, "\nmean(phi) averaged over draws: %.4f\n", *phi_mean_average);
    out << buf;
  }
  return out.str();
}

DiagnosticsReport diagnose(std::span<const Trace> traces,
                           std::span<const CoordinateAcceptance> acceptance,
                           std::span<const std::vector<double>> phi_means, RhatVariant variant,
                           bool include_phi) {
  if (traces.empty()) throw SpecError("no traces to diagnose", "diagnostics");
  DiagnosticsReport report;
  report.variant = variant;
  report.chains = traces.size();
  report.draws_per_chain = traces.front().length();
  report.acceptance.assign(acceptance.begin(), acceptance.end());

  const auto names = traces.front().names();
  for (const auto& t : traces) {
    if (!std::equal(names.begin(), names.end(), t.names().begin(), t.names().end())) {
      throw SpecError("traces disagree on parameter names", "diagnostics");
    }
  }

  for (std::size_t j = 0; j < names.size(); ++j) {
    if (!include_phi && parse_phi_name(names[j])) continue;
    ParameterDiagnostics pd;
    pd.name = names[j];
    std::vector<std::span<const double>> cols;
    for (const auto& t : traces) cols.push_back(t.column(j));
    try {
      if (cols.size() >= 2) {
        pd.rhat = gelman_rubin(cols, variant);
        pd.rhat_high = *pd.rhat > kRhatThreshold;
      }
      const auto ess = effective_sample_size(std::span<const std::span<const double>>(cols));
      pd.ess = ess.ess;
      pd.ess_capped = ess.capped;
      pd.ess_low = ess.ess < kEssThreshold;
    } catch (const DegenerateChainError& e) {
      pd.note = "degenerate: " + std::string(e.what());
    } catch (const SpecError& e) {
      pd.note = e.what();
    }
    report.parameters.push_back(std::move(pd));
  }

  double total = 0.0;
  std::size_t count = 0;
  for (const auto& series : phi_means) {
    for (double v : series) total += v;
    count += series.size();
  }
  if (count > 0) report.phi_mean_average = total / static_cast<double>(count);
  return report;
}

}  // namespace crashre
