#include "crashre/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "crashre/errors.hpp"
#include "crashre/negbin.hpp"
#include "crashre/rng.hpp"

namespace crashre {

namespace {

constexpr std::uint64_t kCovariateStream = 0x636f76;  // "cov"
constexpr std::uint64_t kCrashStream = 0x637273;      // "crs"
constexpr std::uint64_t kFreshPhiStream = 0x706869;   // "phi"

CrashTruth make_truth(CrashType type, std::vector<std::pair<std::string, double>> beta,
                      double r, double sigma2) {
  CrashTruth t;
  t.crash_type = type;
  t.beta = std::move(beta);
  t.r = r;
  t.sigma2_phi = sigma2;
  return t;
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

ApproachRecord draw_approach(const CovariateRecipe& rc, Rng& rng) {
  ApproachRecord rec;
  const double total = std::round(uniform(rng, rc.aadt_min, rc.aadt_max));
  const double left =
      std::max(1.0, std::round(total * uniform(rng, rc.left_share_min, rc.left_share_max)));
  const double right =
      std::max(1.0, std::round(total * uniform(rng, rc.right_share_min, rc.right_share_max)));
  rec.aadt_total = total;
  rec.aadt_left = left;
  rec.aadt_right = right;
  rec.aadt_through = total - left - right;

  const int through_lanes = uniform_int(rng, 1, rc.lanes_through_max);
  const int room = rc.lanes_total_max - through_lanes;
  const int left_lanes = uniform_int(rng, 0, std::min(2, room));
  const int right_lanes = uniform_int(rng, 0, std::min(2, room - left_lanes));
  rec.lanes_through = through_lanes;
  rec.lanes_left = left_lanes;
  rec.lanes_right = right_lanes;
  rec.lanes_total = through_lanes + left_lanes + right_lanes;

  rec.median_present = uniform_int(rng, 0, 1);
  rec.left_turn_offset = uniform_int(rng, -1, 1);
  rec.intersection_angle = uniform(rng, rc.angle_min, rc.angle_max);
  rec.friction = uniform(rng, rc.friction_min, rc.friction_max);
  rec.coordinated = uniform_int(rng, 0, 1);
  rec.left_turn_control = uniform_int(rng, 0, 2);
  rec.yellow_minus_standard = uniform(rng, rc.yellow_min, rc.yellow_max);
  rec.all_red_minus_standard = uniform(rng, rc.all_red_min, rc.all_red_max);
  rec.flashing_mode = uniform_int(rng, 0, 1);
  rec.speed_limit = uniform(rng, rc.speed_min, rc.speed_max);
  return rec;
}

double truth_log_mean(const CrashTruth& truth, const ApproachRecord& rec) {
  const auto rule = exposure_rule(truth.crash_type);
  double eta = 0;
  for (const auto& [name, coef] : truth.beta) {
    if (name == kInterceptColumn) {
      eta += coef;
    } else if (name == kLogExposureColumn) {
      eta += coef * std::log(conflicting_volume(rec, rule));
    } else {
      const auto v = covariate_value(rec, name);
      if (!v) throw SpecError("generator left `" + name + "` empty", "simulate_predict");
      eta += coef * *v;
    }
  }
  return eta;
}

// Group effect of row i for draw s, or nullopt when the draws carry none.
std::optional<double> stored_phi(const PosteriorDraws& draws, std::size_t s, std::size_t group) {
  if (!draws.phi.empty()) {
    if (group < draws.phi[s].size()) return draws.phi[s][group];
    return std::nullopt;
  }
  if (group < draws.phi_point.size() && !std::isnan(draws.phi_point[group])) {
    return draws.phi_point[group];
  }
  return std::nullopt;
}

bool row_out_of_sample(const PosteriorDraws& draws, std::size_t group) {
  if (!draws.has_random_effects()) return false;
  if (!draws.phi.empty()) return group >= draws.phi.front().size();
  return group >= draws.phi_point.size() || std::isnan(draws.phi_point[group]);
}

// Expected count of `row` under each draw. Out-of-sample rows take a
// fresh phi from N(0, sigma2) seeded per row.
std::vector<double> row_thetas(const PosteriorDraws& draws, const DesignMatrix& dm,
                               std::size_t row, std::uint64_t seed) {
  const auto dr = dm.row(row);
  const bool fresh = row_out_of_sample(draws, dr.group);
  Rng rng(derive_seed(seed, {kFreshPhiStream, row}));
  std::normal_distribution<double> z;
  std::vector<double> theta(draws.size());
  for (std::size_t s = 0; s < draws.size(); ++s) {
    double eta = std::inner_product(dr.x.begin(), dr.x.end(), draws.beta[s].begin(), 0.0);
    if (fresh) {
      eta += std::sqrt(draws.sigma2_phi[s]) * z(rng);
    } else if (draws.has_random_effects()) {
      eta += stored_phi(draws, s, dr.group).value_or(0.0);
    }
    if (!std::isfinite(eta) || std::abs(eta) > kMaxLinearPredictor) {
      throw DivergenceError("predicted linear predictor out of range",
                            "row " + std::to_string(row) + " draw " + std::to_string(s) +
                                " eta " + std::to_string(eta));
    }
    theta[s] = std::exp(eta);
  }
  return theta;
}

}  // namespace

std::vector<std::int64_t> mixture_quantiles(std::span<const double> theta,
                                            std::span<const double> r,
                                            std::span<const double> probs) {
  if (theta.empty() || theta.size() != r.size()) {
    throw SpecError("mixture needs matching, nonempty theta and r", "simulate_predict");
  }
  if (!std::is_sorted(probs.begin(), probs.end())) {
    throw SpecError("quantile probabilities must be ascending", "simulate_predict");
  }
  constexpr double kLinearFloor = -600.0;
  constexpr std::int64_t kMaxCount = 100'000'000;
  const std::size_t m = theta.size();
  // Per component: pmf at the current y, in linear scale once it is large
  // enough, in log scale before that.
  std::vector<double> pmf(m), log_pmf(m), q(m), log_q(m);
  std::vector<bool> linear(m);
  for (std::size_t s = 0; s < m; ++s) {
    NBParams p{theta[s], r[s]};
    log_pmf[s] = nb_log_pmf(0, p);
    q[s] = theta[s] / (r[s] + theta[s]);
    log_q[s] = std::log(q[s]);
    linear[s] = log_pmf[s] > kLinearFloor;
    pmf[s] = linear[s] ? std::exp(log_pmf[s]) : 0.0;
  }
  std::vector<std::int64_t> out;
  out.reserve(probs.size());
  double cdf = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::int64_t y = 0; out.size() < probs.size(); ++y) {
    if (y > kMaxCount) throw NumericError("predictive quantile beyond 1e8", "simulate_predict");
    const double yd = static_cast<double>(y);
    double mass = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      if (linear[s]) {
        mass += pmf[s];
        pmf[s] *= (yd + r[s]) / (yd + 1.0) * q[s];
      } else {
        log_pmf[s] += std::log((yd + r[s]) / (yd + 1.0)) + log_q[s];
        if (log_pmf[s] > kLinearFloor) {
          linear[s] = true;
          pmf[s] = std::exp(log_pmf[s]);
        }
      }
    }
    cdf += mass * inv_m;
    // Rounding can leave the accumulated cdf a hair under 1.
    while (out.size() < probs.size() && cdf >= probs[out.size()] - 1e-12) out.push_back(y);
  }
  return out;
}

std::vector<std::string> CrashTruth::design_covariates() const {
  std::vector<std::string> out;
  bool control_added = false;
  for (const auto& [name, coef] : beta) {
    if (name == kInterceptColumn || name == kLogExposureColumn) continue;
    if (name == kProtectedColumn || name == kProtectedPermissiveColumn) {
      const bool both = std::any_of(beta.begin(), beta.end(), [&](const auto& b) {
        return b.first == (name == kProtectedColumn ? kProtectedPermissiveColumn
                                                    : kProtectedColumn);
      });
      if (both) {
        if (!control_added) out.emplace_back("left_turn_control");
        control_added = true;
        continue;
      }
    }
    out.push_back(name);
  }
  return out;
}

CrashTruth published_estimates(CrashType type) {
  switch (type) {
    case CrashType::kRearEnd:
      return make_truth(type,
                        {{"intercept", -4.51},
                         {"log_exposure", 0.658},
                         {"lanes_right", 0.2522},
                         {"friction", -0.0127},
                         {"coordinated", 0.2394},
                         {"lt_protected", 0.681},
                         {"lt_protected_permissive", 0.3728},
                         {"speed_limit", 0.01}},
                        0.2319, 0.2816);
    case CrashType::kOpposingLeftTurn:
      return make_truth(type,
                        {{"intercept", -5.99},
                         {"log_exposure", 0.2829},
                         {"lanes_through", 0.1906},
                         {"median_present", 0.4062},
                         {"lt_protected", -0.5272},
                         {"lt_protected_permissive", 0.4506},
                         {"speed_limit", 0.0434}},
                        0.7083, 0.46);
    case CrashType::kCrossingLeftTurn:
      return make_truth(type,
                        {{"intercept", -6.88},
                         {"log_exposure", 0.3828},
                         {"opposing_lanes_through", -0.5972},
                         {"median_present", -0.1748},
                         {"lt_protected", 0.2788},
                         {"lt_protected_permissive", 0.2033},
                         {"near_cross_speed_limit", 0.0228}},
                        0.569, 0.3341);
    case CrashType::kRightAngle:
      return make_truth(type,
                        {{"intercept", -2.416},
                         {"log_exposure", 0.1748},
                         {"lanes_through", -0.1},
                         {"yellow_minus_standard", -0.3945},
                         {"all_red_minus_standard", -0.1137},
                         {"flashing_mode", 0.5}},
                        0.1238, 0.2908);
    case CrashType::kSideswipe:
      return make_truth(type,
                        {{"intercept", -7.535},
                         {"log_exposure", 0.6466},
                         {"lanes_left", 0.3842},
                         {"lanes_through", 0.1975},
                         {"lanes_right", 0.2615},
                         {"lt_protected", 0.5328},
                         {"lt_protected_permissive", 0.4613}},
                        0.064, 0.3677);
  }
  throw SpecError("unhandled crash type", "simulate_predict");
}

GeneratorSpec GeneratorSpec::published(std::size_t intersections, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.intersections = intersections;
  spec.seed = seed;
  for (auto t : kAllCrashTypes) spec.truths.push_back(published_estimates(t));
  return spec;
}

void GeneratorSpec::validate() const {
  auto fail = [](const std::string& what) { throw SpecError(what, "simulate_predict"); };
  if (intersections == 0) fail("generator needs at least one intersection");
  if (approaches_per_intersection < 1 || approaches_per_intersection > 4) {
    fail("approaches per intersection must be 1 to 4");
  }
  const auto& rc = recipe;
  if (!(rc.aadt_min >= 1 && rc.aadt_max >= rc.aadt_min)) fail("bad AADT range");
  if (!(rc.left_share_min > 0 && rc.left_share_max >= rc.left_share_min &&
        rc.right_share_min > 0 && rc.right_share_max >= rc.right_share_min &&
        rc.left_share_max + rc.right_share_max < 1)) {
    fail("turning shares must be positive and leave through traffic");
  }
  if (rc.lanes_through_max < 1 || rc.lanes_total_max < rc.lanes_through_max) {
    fail("bad lane limits");
  }
  std::vector<CrashType> seen;
  for (const auto& t : truths) {
    if (std::find(seen.begin(), seen.end(), t.crash_type) != seen.end()) {
      fail("crash type `" + std::string(to_string(t.crash_type)) + "` has two truths");
    }
    seen.push_back(t.crash_type);
    if (!(t.r > 0) || !std::isfinite(t.r)) fail("true r must be positive");
    if (!(t.sigma2_phi >= 0) || !std::isfinite(t.sigma2_phi)) {
      fail("true sigma2_phi must be nonnegative");
    }
    std::vector<std::string> names;
    for (const auto& [name, coef] : t.beta) {
      if (!std::isfinite(coef)) fail("coefficient `" + name + "` is not finite");
      if (name != kInterceptColumn && name != kLogExposureColumn) names.push_back(name);
    }
    expand_covariates(names);
  }
}

SyntheticData generate(const GeneratorSpec& spec) {
  spec.validate();
  const std::size_t n_int = spec.intersections;
  const std::size_t legs = spec.approaches_per_intersection;

  Rng cov_rng(derive_seed(spec.seed, {kCovariateStream}));
  std::vector<ApproachRecord> records;
  records.reserve(n_int * legs);
  for (std::size_t i = 0; i < n_int; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "I%04zu", i + 1);
    const double county = uniform_int(cov_rng, 0, 1);
    for (std::size_t a = 0; a < legs; ++a) {
      ApproachRecord rec = draw_approach(spec.recipe, cov_rng);
      rec.intersection_id = id;
      rec.approach = static_cast<Approach>(a);
      rec.county = county;
      records.push_back(std::move(rec));
    }
  }
  Dataset partial = derive_partner_volumes(Dataset(std::move(records)), spec.traffic_side);
  std::vector<ApproachRecord> filled(partial.records().begin(), partial.records().end());
  std::vector<bool> missing(filled.size());
  for (std::size_t k = 0; k < filled.size(); ++k) missing[k] = partial.partner_missing(k);

  SyntheticData out;
  out.spec = spec;
  for (std::size_t t = 0; t < spec.truths.size(); ++t) {
    const auto& truth = spec.truths[t];
    const auto type_index = static_cast<std::uint64_t>(truth.crash_type);
    Rng rng(derive_seed(spec.seed, {kCrashStream, type_index}));
    std::normal_distribution<double> z;
    std::vector<double> phi(n_int, 0.0);
    if (truth.sigma2_phi > 0) {
      const double sd = std::sqrt(truth.sigma2_phi);
      for (auto& v : phi) v = sd * z(rng);
    }
    std::vector<double> theta(filled.size(), 0.0);
    for (std::size_t k = 0; k < filled.size(); ++k) {
      if (missing[k]) {
        // No partner volumes, so no exposure for the product rules.
        const auto rule = exposure_rule(truth.crash_type);
        if (rule.form == ExposureForm::kProductOfVolumes) {
          theta[k] = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
      }
      const double eta = truth_log_mean(truth, filled[k]) + phi[k / legs];
      if (std::abs(eta) > kMaxLinearPredictor) {
        throw DivergenceError("generator linear predictor out of range",
                              "record " + std::to_string(k) + " eta " + std::to_string(eta));
      }
      theta[k] = std::exp(eta);
      filled[k].crashes(truth.crash_type) = nb_sample({theta[k], truth.r}, rng);
    }
    out.phi.push_back(std::move(phi));
    out.theta.push_back(std::move(theta));
  }
  out.dataset = Dataset(std::move(filled), std::move(missing));
  return out;
}

Parameters truth_parameters(const SyntheticData& data, std::size_t truth_index,
                            const DesignMatrix& dm) {
  if (truth_index >= data.spec.truths.size()) {
    throw SpecError("truth index out of range", "simulate_predict");
  }
  if (!dm.column_centers.empty()) {
    throw SpecError("true parameters are on the raw covariate scale; design is centered",
                    "simulate_predict");
  }
  const auto& truth = data.spec.truths[truth_index];
  Parameters p;
  p.beta.assign(dm.cols(), 0.0);
  std::vector<bool> set(dm.cols(), false);
  for (const auto& [name, coef] : truth.beta) {
    const auto c = dm.column_index(name);
    if (!c) throw SpecError("design lacks true column `" + name + "`", "simulate_predict");
    p.beta[*c] = coef;
    set[*c] = true;
  }
  for (std::size_t c = 0; c < dm.cols(); ++c) {
    if (!set[c]) {
      throw SpecError("design column `" + dm.columns()[c] + "` has no true value",
                      "simulate_predict");
    }
  }
  p.phi = data.phi[truth_index];
  p.r = truth.r;
  p.sigma2_phi = truth.sigma2_phi;
  return p;
}

PosteriorDraws extract_draws(std::span<const Trace> traces, const DesignMatrix& dm,
                             std::size_t max_draws, std::optional<double> fixed_r) {
  if (traces.empty()) throw SpecError("no traces", "simulate_predict");
  if (max_draws == 0) throw SpecError("max_draws must be positive", "simulate_predict");
  std::size_t total = 0;
  for (const auto& t : traces) total += t.length();
  if (total == 0) throw SpecError("traces are empty", "simulate_predict");

  const auto& first = traces.front();
  for (const auto& t : traces) {
    if (!std::equal(t.names().begin(), t.names().end(), first.names().begin(),
                    first.names().end())) {
      throw SpecError("chains have different columns", "simulate_predict");
    }
  }
  std::vector<std::size_t> beta_cols;
  for (const auto& name : dm.columns()) {
    const auto j = first.index_of(name);
    if (!j) throw SpecError("trace lacks design column `" + name + "`", "simulate_predict");
    beta_cols.push_back(*j);
  }
  const auto r_col = first.index_of("r");
  if (!r_col && !fixed_r) {
    throw SpecError("trace has no `r` column and no fixed r was given", "simulate_predict");
  }
  const auto s2_col = first.index_of("sigma2_phi");
  std::vector<std::pair<std::size_t, std::size_t>> phi_cols;  // group, column
  for (std::size_t j = 0; j < first.parameter_count(); ++j) {
    if (const auto g = parse_phi_name(first.names()[j])) phi_cols.emplace_back(*g, j);
  }
  std::size_t phi_len = 0;
  for (const auto& [g, j] : phi_cols) phi_len = std::max(phi_len, g + 1);
  if (phi_cols.size() != phi_len) {
    throw SpecError("trace phi columns are not contiguous from phi[0]", "simulate_predict");
  }

  const std::size_t keep = std::min(total, max_draws);
  PosteriorDraws out;
  out.beta.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    std::size_t flat = k * total / keep;
    std::size_t c = 0;
    while (flat >= traces[c].length()) flat -= traces[c++].length();
    const auto& t = traces[c];
    std::vector<double> beta(beta_cols.size());
    for (std::size_t b = 0; b < beta_cols.size(); ++b) beta[b] = t.column(beta_cols[b])[flat];
    out.beta.push_back(std::move(beta));
    out.r.push_back(r_col ? t.column(*r_col)[flat] : *fixed_r);
    if (s2_col) out.sigma2_phi.push_back(t.column(*s2_col)[flat]);
    if (!phi_cols.empty()) {
      std::vector<double> phi(phi_len);
      for (const auto& [g, j] : phi_cols) phi[g] = t.column(j)[flat];
      out.phi.push_back(std::move(phi));
    }
  }
  return out;
}

PosteriorDraws point_draws(const Parameters& params) {
  PosteriorDraws out;
  out.beta.push_back(params.beta);
  out.r.push_back(params.r);
  if (params.has_random_effects()) {
    out.sigma2_phi.push_back(params.sigma2_phi);
    out.phi.push_back(params.phi);
  }
  return out;
}

std::vector<RowPrediction> posterior_predict(const PosteriorDraws& draws,
                                             const DesignMatrix& dm,
                                             const PredictOptions& options) {
  if (draws.size() == 0) throw SpecError("no posterior draws", "simulate_predict");
  for (const auto& b : draws.beta) {
    if (b.size() != dm.cols()) {
      throw SpecError("draw has " + std::to_string(b.size()) + " coefficients, design has " +
                          std::to_string(dm.cols()),
                      "simulate_predict");
    }
  }
  const double n_draws = static_cast<double>(draws.size());
  std::vector<RowPrediction> out(dm.rows());
  for (std::size_t i = 0; i < dm.rows(); ++i) {
    const auto theta = row_thetas(draws, dm, i, options.seed);
    double theta_sum = 0, tail = 0;
    for (std::size_t s = 0; s < draws.size(); ++s) {
      theta_sum += theta[s];
      tail += 1.0 - nb_cdf(options.threshold, {theta[s], draws.r[s]});
    }
    constexpr std::array<double, 2> kProbs{0.025, 0.975};
    const auto q = mixture_quantiles(theta, draws.r, kProbs);
    auto& row = out[i];
    row.row = i;
    row.record_index = dm.record_index.empty() ? i : dm.record_index[i];
    row.group = dm.row(i).group;
    row.mean_theta = theta_sum / n_draws;
    row.q025 = q[0];
    row.q975 = q[1];
    row.exceedance = tail / n_draws;
    row.out_of_sample = row_out_of_sample(draws, row.group);
  }
  return out;
}

double predictive_cdf(const PosteriorDraws& draws, const DesignMatrix& dm, std::size_t row,
                      std::int64_t y, std::uint64_t seed) {
  if (draws.size() == 0) throw SpecError("no posterior draws", "simulate_predict");
  if (row >= dm.rows()) throw SpecError("row out of range", "simulate_predict");
  if (y < 0) return 0.0;
  const auto theta = row_thetas(draws, dm, row, seed);
  double sum = 0;
  for (std::size_t s = 0; s < draws.size(); ++s) sum += nb_cdf(y, {theta[s], draws.r[s]});
  return sum / static_cast<double>(draws.size());
}

HotspotRanking rank_hotspots(std::span<const RowPrediction> predictions,
                             std::int64_t threshold) {
  if (predictions.empty()) throw SpecError("no predictions to rank", "simulate_predict");
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = predictions[a];
    const auto& pb = predictions[b];
    if (pa.exceedance != pb.exceedance) return pa.exceedance > pb.exceedance;
    if (pa.mean_theta != pb.mean_theta) return pa.mean_theta > pb.mean_theta;
    return pa.record_index < pb.record_index;
  });
  HotspotRanking out;
  out.threshold = threshold;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& p = predictions[order[k]];
    out.entries.push_back(
        {k + 1, p.row, p.record_index, p.mean_theta, p.exceedance, p.out_of_sample});
  }
  return out;
}

}  // namespace crashre
