#ifndef CRASHRE_DIAGNOSTICS_HPP_
#define CRASHRE_DIAGNOSTICS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crashre/trace.hpp"

namespace crashre {

enum class RhatVariant { kClassic, kSplit };

// Gelman-Rubin potential scale reduction over m >= 2 equal-length chains
// (n >= 4 each):
//   W = mean within-chain variance, B = n * variance of chain means,
//   Rhat = sqrt(((n-1)/n W + B/n) / W).
// The split variant halves every chain first. Throws DegenerateChainError
// when W = 0 and SpecError on bad shapes.
double gelman_rubin(std::span<const std::span<const double>> chains,
                    RhatVariant variant = RhatVariant::kClassic);

struct EssEstimate {
  double ess = 0.0;
  // True when the estimate exceeded the sample count (negatively
  // autocorrelated trace) and was capped at n.
  bool capped = false;
};

// n / (1 + 2 sum rho_k), autocorrelations summed over Geyer's initial
// positive sequence (pairs rho_2m + rho_2m+1 until the first negative
// pair). Requires n >= 10; throws DegenerateChainError for a constant
// trace.
EssEstimate effective_sample_size(std::span<const double> trace);

// Sum of per-chain ESS.
EssEstimate effective_sample_size(std::span<const std::span<const double>> chains);

inline constexpr double kRhatThreshold = 1.1;
inline constexpr double kEssThreshold = 400.0;

struct ParameterDiagnostics {
  std::string name;
  std::optional<double> rhat;  // absent with one chain or a degenerate trace
  std::optional<double> ess;
  bool ess_capped = false;
  bool rhat_high = false;  // rhat > 1.1
  bool ess_low = false;    // ess < 400
  std::string note;
};

struct CoordinateAcceptance {
  std::string name;
  std::vector<double> per_chain;
};

struct DiagnosticsReport {
  RhatVariant variant = RhatVariant::kClassic;
  std::size_t chains = 0;
  std::size_t draws_per_chain = 0;
  std::vector<ParameterDiagnostics> parameters;
  std::vector<CoordinateAcceptance> acceptance;
  std::optional<double> phi_mean_average;  // should hover near 0

  bool any_rhat_high() const;
  bool any_ess_low() const;
  std::string to_json() const;
  std::string to_text() const;
};

// Diagnoses every trace column except stored phi[i] columns (unless
// include_phi). Acceptance and phi-mean inputs may be empty.
DiagnosticsReport diagnose(std::span<const Trace> traces,
                           std::span<const CoordinateAcceptance> acceptance = {},
                           std::span<const std::vector<double>> phi_means = {},
                           RhatVariant variant = RhatVariant::kClassic,
                           bool include_phi = false);

}  // namespace crashre

#endif  // CRASHRE_DIAGNOSTICS_HPP_
