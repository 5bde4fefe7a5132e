#ifndef CRASHRE_SIMULATE_HPP_
#define CRASHRE_SIMULATE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crashre/data_model.hpp"
#include "crashre/design.hpp"
#include "crashre/model.hpp"
#include "crashre/trace.hpp"

namespace crashre {

// True parameters of one crash-type model. Coefficients are keyed by
// design column name (intercept, log_exposure, expanded covariates).
struct CrashTruth {
  CrashType crash_type = CrashType::kRearEnd;
  std::vector<std::pair<std::string, double>> beta;
  double r = 1.0;
  double sigma2_phi = 0.0;

  // Covariate list (record field names, left_turn_control expanded) that a
  // ModelSpec needs to recover these coefficients.
  std::vector<std::string> design_covariates() const;
};

// Posterior means published for the four-leg signalized intersection
// study, one column per crash type.
CrashTruth published_estimates(CrashType type);

// Uniform ranges for synthetic covariates. Integer-coded fields draw
// uniformly from their coding sets.
struct CovariateRecipe {
  double aadt_min = 51, aadt_max = 50763;
  double left_share_min = 0.05, left_share_max = 0.25;
  double right_share_min = 0.03, right_share_max = 0.22;
  int lanes_through_max = 5;
  int lanes_total_max = 7;
  double angle_min = 36, angle_max = 144;
  double friction_min = 24.19, friction_max = 46.07;
  double yellow_min = 0.0, yellow_max = 5.5;
  double all_red_min = 0.5, all_red_max = 5.1;
  double speed_min = 15, speed_max = 60;
};

struct GeneratorSpec {
  std::size_t intersections = 177;
  std::size_t approaches_per_intersection = 4;  // legs N, E, S, W in order
  // Crash types without a truth get zero counts.
  std::vector<CrashTruth> truths;
  CovariateRecipe recipe;
  TrafficSide traffic_side = TrafficSide::kRight;
  std::uint64_t seed = 1;

  // All five crash types at their published estimates.
  static GeneratorSpec published(std::size_t intersections, std::uint64_t seed);
  void validate() const;  // throws SpecError
};

struct SyntheticData {
  Dataset dataset;
  GeneratorSpec spec;
  // Indexed like spec.truths: true phi per intersection and true expected
  // count per record.
  std::vector<std::vector<double>> phi;
  std::vector<std::vector<double>> theta;
};

// Draws covariates, partner fields, random effects and NB counts. The
// covariate stream and each crash type's stream are seeded separately
// from spec.seed.
SyntheticData generate(const GeneratorSpec& spec);

// Parameters in design-column order for a truth, with the generator's phi.
Parameters truth_parameters(const SyntheticData& data, std::size_t truth_index,
                            const DesignMatrix& dm);

// Posterior draws aligned with a design: beta per draw, r, sigma2 and, when
// the traces stored them, phi. A group is out of sample when neither phi
// nor phi_point covers it.
struct PosteriorDraws {
  std::vector<std::vector<double>> beta;
  std::vector<double> r;
  std::vector<double> sigma2_phi;     // empty for fixed-effects traces
  std::vector<std::vector<double>> phi;  // per draw; empty when not stored
  // Plug-in phi per group (posterior means) used when phi was not stored;
  // NaN marks a group the fit never saw.
  std::vector<double> phi_point;

  std::size_t size() const { return beta.size(); }
  bool has_random_effects() const { return !sigma2_phi.empty(); }
};

// Pools the chains and keeps at most max_draws evenly spaced draws.
// fixed_r supplies r for traces sampled with r held constant.
PosteriorDraws extract_draws(std::span<const Trace> traces, const DesignMatrix& dm,
                             std::size_t max_draws = 4000,
                             std::optional<double> fixed_r = std::nullopt);

// Collapses known parameters into a single "draw".
PosteriorDraws point_draws(const Parameters& params);

struct PredictOptions {
  std::int64_t threshold = 0;  // exceedance is P(y_new > threshold)
  std::uint64_t seed = 1;
};

struct RowPrediction {
  std::size_t row = 0;
  std::size_t record_index = 0;
  std::size_t group = 0;
  double mean_theta = 0.0;        // posterior (and predictive) mean count
  std::int64_t q025 = 0;          // quantiles of the predictive mixture
  std::int64_t q975 = 0;
  double exceedance = 0.0;        // P(y_new > threshold)
  bool out_of_sample = false;     // phi drawn fresh from N(0, sigma2)
};

// The predictive distribution of a row is the equal-weight mixture of
// NB(theta_s, r_s) over the draws; mean, quantiles and exceedance are
// evaluated on that mixture exactly rather than from simulated counts.
std::vector<RowPrediction> posterior_predict(const PosteriorDraws& draws,
                                             const DesignMatrix& dm,
                                             const PredictOptions& options);

// Smallest counts y with mixture cdf >= each of `probs` (ascending).
std::vector<std::int64_t> mixture_quantiles(std::span<const double> theta,
                                            std::span<const double> r,
                                            std::span<const double> probs);

// P(y_new <= y) for one row: NB cdf averaged over the draws, using the
// same fresh-phi stream as posterior_predict for out-of-sample rows.
double predictive_cdf(const PosteriorDraws& draws, const DesignMatrix& dm, std::size_t row,
                      std::int64_t y, std::uint64_t seed);

struct HotspotEntry {
  std::size_t rank = 0;  // 1-based
  std::size_t row = 0;
  std::size_t record_index = 0;
  double mean_theta = 0.0;
  double exceedance = 0.0;
  bool out_of_sample = false;
};

struct HotspotRanking {
  std::int64_t threshold = 0;
  std::vector<HotspotEntry> entries;  // in rank order
};

// Descending exceedance probability, ties by descending posterior mean,
// then by record order.
HotspotRanking rank_hotspots(std::span<const RowPrediction> predictions, std::int64_t threshold);

}  // namespace crashre

#endif  // CRASHRE_SIMULATE_HPP_
