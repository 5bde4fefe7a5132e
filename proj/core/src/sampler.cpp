#include "crashre/sampler.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "crashre/errors.hpp"
#include "crashre/negbin.hpp"

namespace crashre {

namespace {

// Guards the incremental eta cache the same way model_core guards eta.
void check_eta(double eta, const ChainState& state, std::size_t row) {
  if (std::abs(eta) <= kMaxLinearPredictor) return;
  std::ostringstream report;
  report << "iteration=" << state.iteration << " row=" << row << " eta=" << eta
         << " r=" << state.params.r << " beta=[";
  for (std::size_t k = 0; k < state.params.beta.size(); ++k) {
    report << (k ? "," : "") << state.params.beta[k];
  }
  report << "]";
  throw DivergenceError("linear predictor outside [-700, 700] during sampling",
                        report.str());
}

double row_term(std::int64_t y, double eta, double log_r_plus_mu, double r) {
  const double yd = static_cast<double>(y);
  return yd * eta - (yd + r) * log_r_plus_mu;
}

}  // namespace

// --- SamplerConfig --------------------------------------------------------

void SamplerConfig::validate() const {
  if (n_chains == 0) throw SpecError("n_chains must be at least 1", "sampler");
  if (n_burnin >= n_iterations) {
    throw SpecError("burn-in must be shorter than the iteration count", "sampler");
  }
  if (thinning == 0) throw SpecError("thinning must be at least 1", "sampler");
  if (adapt_window == 0) throw SpecError("adaptation window must be at least 1", "sampler");
  if (!(target_acceptance > 0 && target_acceptance < 1)) {
    throw SpecError("target acceptance must lie in (0, 1)", "sampler");
  }
  if (fixed_r && !(*fixed_r > 0)) throw SpecError("fixed r must be positive", "sampler");
  if (!chain_seeds.empty() && chain_seeds.size() != n_chains) {
    throw SpecError("chain_seeds must list one seed per chain", "sampler");
  }
  auto seeds = resolved_seeds();
  std::sort(seeds.begin(), seeds.end());
  if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) {
    throw SpecError("chain seeds must be distinct", "sampler");
  }
}

std::vector<std::uint64_t> SamplerConfig::resolved_seeds() const {
  if (!chain_seeds.empty()) return chain_seeds;
  std::vector<std::uint64_t> seeds(n_chains);
  for (std::size_t c = 0; c < n_chains; ++c) seeds[c] = derive_seed(seed, {0x636861696eULL, c});
  return seeds;
}

// --- SamplerModel ---------------------------------------------------------

SamplerModel::SamplerModel(const DesignMatrix& dm, const PriorSpec& priors,
                           bool random_effects, bool centered_proposals)
    : dm_(&dm), priors_(priors), random_effects_(random_effects) {
  priors_.validate();
  const std::size_t n = dm.rows();
  const std::size_t p = dm.cols();
  if (n == 0) throw SpecError("cannot sample an empty design", "sampler");

  for (std::size_t k = 0; k < p && !intercept_; ++k) {
    bool ones = true;
    for (std::size_t i = 0; i < n && ones; ++i) ones = dm.row(i).x[k] == 1.0;
    if (ones) intercept_ = k;
  }

  centers_.assign(p, 0.0);
  if (centered_proposals && intercept_) {
    for (std::size_t k = 0; k < p; ++k) {
      if (k == *intercept_) continue;
      double sum = 0;
      for (std::size_t i = 0; i < n; ++i) sum += dm.row(i).x[k];
      centers_[k] = sum / static_cast<double>(n);
    }
  }

  group_rows_.resize(dm.group_count());
  for (std::size_t i = 0; i < n; ++i) group_rows_[dm.row(i).group].push_back(i);

  std::vector<std::int64_t> ys(dm.responses().begin(), dm.responses().end());
  std::sort(ys.begin(), ys.end());
  for (std::size_t i = 0; i < ys.size();) {
    std::size_t j = i;
    while (j < ys.size() && ys[j] == ys[i]) ++j;
    response_histogram_.emplace_back(ys[i], j - i);
    i = j;
  }
}

std::size_t SamplerModel::slot(Coordinate c) const {
  switch (c.kind) {
    case Coordinate::Kind::kBeta:
      return c.index;
    case Coordinate::Kind::kPhi:
      return dm_->cols() + c.index;
    case Coordinate::Kind::kLogR:
      return dm_->cols() + phi_count();
    case Coordinate::Kind::kPhiScale:
      return dm_->cols() + phi_count() + 1;
  }
  return 0;
}

std::string SamplerModel::coordinate_name(std::size_t s) const {
  if (s < dm_->cols()) return dm_->columns()[s];
  if (s < dm_->cols() + phi_count()) return phi_name(s - dm_->cols());
  if (s == dm_->cols() + phi_count()) return "log_r";
  return "phi_scale";
}

double SamplerModel::lgamma_sum(double r) const {
  const double lg_r = log_gamma(r);
  double sum = 0.0;
  for (const auto& [y, count] : response_histogram_) {
    if (y == 0) continue;
    sum += static_cast<double>(count) * (log_gamma(static_cast<double>(y) + r) - lg_r);
  }
  return sum;
}

void SamplerModel::refresh(ChainState& state) const {
  const std::size_t n = dm_->rows();
  state.eta.resize(n);
  state.log_r_plus_mu.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = dm_->row(i);
    double eta = 0.0;
    for (std::size_t k = 0; k < row.x.size(); ++k) eta += state.params.beta[k] * row.x[k];
    if (random_effects_) eta += state.params.phi[row.group];
    check_eta(eta, state, i);
    state.eta[i] = eta;
    state.log_r_plus_mu[i] = std::log(state.params.r + std::exp(eta));
  }
  state.lgamma_sum = lgamma_sum(state.params.r);
}

ChainState SamplerModel::initial_state(std::uint64_t seed, std::optional<double> fixed_r) const {
  const DesignMatrix& dm = *dm_;
  const std::size_t n = dm.rows();
  const std::size_t p = dm.cols();

  ChainState st;
  st.rng.seed(seed);

  double mean_y = 0.0;
  for (auto y : dm.responses()) mean_y += static_cast<double>(y);
  mean_y /= static_cast<double>(n);

  auto& prm = st.params;
  prm.beta.assign(p, 0.0);
  prm.r = fixed_r.value_or(1.0);
  prm.sigma2_phi = 0.1;
  if (random_effects_) prm.phi.assign(dm.group_count(), 0.0);

  const double base = std::log(mean_y + 0.5);
  const auto exposure = dm.column_index(kLogExposureColumn);
  if (intercept_) {
    prm.beta[*intercept_] = base;
    if (exposure) {
      constexpr double kExposureInit = 0.5;
      double mean_x = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean_x += dm.row(i).x[*exposure];
      mean_x /= static_cast<double>(n);
      prm.beta[*exposure] = kExposureInit;
      prm.beta[*intercept_] = base - mean_x * kExposureInit;
    }
  }

  // Proposal scales from the Fisher information of eta at the start
  // (r/(r + mu) * mu per row), times the 2.4 one-dimensional optimum.
  const double w = std::max(prm.r * mean_y / (prm.r + mean_y), 1e-3);
  const std::size_t slots = coordinate_count();
  st.proposal_sd.assign(slots, 1.0);
  for (std::size_t k = 0; k < p; ++k) {
    double info = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = dm.row(i).x[k] - centers_[k];
      info += w * d * d;
    }
    if (info > 0) st.proposal_sd[k] = 2.4 / std::sqrt(info);
  }
  for (std::size_t g = 0; g < phi_count(); ++g) {
    const double info = w * static_cast<double>(group_rows_[g].size()) + 1.0 / prm.sigma2_phi;
    st.proposal_sd[slot({Coordinate::Kind::kPhi, g})] = 2.4 / std::sqrt(info);
  }
  st.proposal_sd[slot({Coordinate::Kind::kLogR, 0})] =
      std::clamp(2.4 * std::sqrt(2.0 / static_cast<double>(n)), 0.05, 1.0);
  st.proposal_sd[slot({Coordinate::Kind::kPhiScale, 0})] = std::clamp(
      2.4 * std::sqrt(0.5 / static_cast<double>(std::max<std::size_t>(phi_count(), 1))), 0.05,
      1.0);

  st.accepted.assign(slots, 0);
  st.attempted.assign(slots, 0);
  st.window_accepted.assign(slots, 0);
  st.window_attempted.assign(slots, 0);

  refresh(st);
  const double lp = log_posterior(dm, prm, priors_);
  if (!std::isfinite(lp)) throw NumericError("initial state has a non-finite log posterior", "sampler");
  return st;
}

// --- updates ---------------------------------------------------------------

double gibbs_sigma2(std::span<const double> phi, InverseGammaPrior prior, Rng& rng) {
  double ss = 0.0;
  for (double v : phi) ss += v * v;
  const double shape = prior.shape + 0.5 * static_cast<double>(phi.size());
  const double rate = prior.scale + 0.5 * ss;
  std::gamma_distribution<double> gamma(shape, 1.0 / rate);
  double precision = gamma(rng);
  // A shape-0.001 gamma draw can underflow to zero.
  precision = std::max(precision, std::numeric_limits<double>::min());
  return 1.0 / precision;
}

namespace {

void update_beta(std::size_t k, ChainState& st, const SamplerModel& model) {
  const DesignMatrix& dm = model.design();
  const auto& priors = model.priors();
  const std::size_t s = k;
  const double sd = st.proposal_sd[s];
  const double r = st.params.r;

  std::normal_distribution<double> normal(0.0, sd);
  const double delta = normal(st.rng);
  const auto icpt = model.intercept();
  const double shift = (icpt && *icpt != k) ? model.proposal_center(k) : 0.0;

  double dlog = 0.0;
  thread_local std::vector<double> new_eta, new_lr;
  const std::size_t n = dm.rows();
  new_eta.resize(n);
  new_lr.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = dm.row(i);
    const double d = row.x[k] - shift;
    const double eta = st.eta[i] + delta * d;
    check_eta(eta, st, i);
    const double lr = std::log(r + std::exp(eta));
    new_eta[i] = eta;
    new_lr[i] = lr;
    dlog += row_term(row.response, eta, lr, r) - row_term(row.response, st.eta[i], st.log_r_plus_mu[i], r);
  }
  const double v = priors.beta_variance;
  const double bk = st.params.beta[k];
  dlog += (bk * bk - (bk + delta) * (bk + delta)) / (2.0 * v);
  if (shift != 0.0) {
    const double b0 = st.params.beta[*icpt];
    const double b0_new = b0 - delta * shift;
    dlog += (b0 * b0 - b0_new * b0_new) / (2.0 * v);
  }

  ++st.attempted[s];
  ++st.window_attempted[s];
  if (metropolis_accept(dlog, st.rng)) {
    ++st.accepted[s];
    ++st.window_accepted[s];
    st.params.beta[k] += delta;
    if (shift != 0.0) st.params.beta[*icpt] -= delta * shift;
    st.eta.swap(new_eta);
    st.log_r_plus_mu.swap(new_lr);
  }
}

void update_phi(std::size_t g, ChainState& st, const SamplerModel& model) {
  const DesignMatrix& dm = model.design();
  const std::size_t s = model.slot({Coordinate::Kind::kPhi, g});
  const double r = st.params.r;
  std::normal_distribution<double> normal(0.0, st.proposal_sd[s]);
  const double delta = normal(st.rng);
  const auto rows = model.rows_of_group(g);

  thread_local std::vector<double> new_eta, new_lr;
  new_eta.resize(rows.size());
  new_lr.resize(rows.size());
  double dlog = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const std::size_t i = rows[j];
    const auto y = dm.responses()[i];
    const double eta = st.eta[i] + delta;
    check_eta(eta, st, i);
    const double lr = std::log(r + std::exp(eta));
    new_eta[j] = eta;
    new_lr[j] = lr;
    dlog += row_term(y, eta, lr, r) - row_term(y, st.eta[i], st.log_r_plus_mu[i], r);
  }
  const double phi = st.params.phi[g];
  const double phi_new = phi + delta;
  dlog += (phi * phi - phi_new * phi_new) / (2.0 * st.params.sigma2_phi);

  ++st.attempted[s];
  ++st.window_attempted[s];
  if (metropolis_accept(dlog, st.rng)) {
    ++st.accepted[s];
    ++st.window_accepted[s];
    st.params.phi[g] = phi_new;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      st.eta[rows[j]] = new_eta[j];
      st.log_r_plus_mu[rows[j]] = new_lr[j];
    }
  }
}

// Target in u = log r: p(r | .) * r.
void update_log_r(ChainState& st, const SamplerModel& model) {
  const DesignMatrix& dm = model.design();
  const auto& prior = model.priors().r;
  const std::size_t s = model.slot({Coordinate::Kind::kLogR, 0});
  std::normal_distribution<double> normal(0.0, st.proposal_sd[s]);
  const double delta = normal(st.rng);
  const double r = st.params.r;
  const double r_new = r * std::exp(delta);

  ++st.attempted[s];
  ++st.window_attempted[s];
  if (!(r_new > 0) || !std::isfinite(r_new)) return;

  const std::size_t n = dm.rows();
  thread_local std::vector<double> new_lr;
  new_lr.resize(n);
  const double lgamma_new = model.lgamma_sum(r_new);
  const double nd = static_cast<double>(n);
  double dlog = lgamma_new - st.lgamma_sum + nd * (r_new * std::log(r_new) - r * std::log(r));
  for (std::size_t i = 0; i < n; ++i) {
    const double yd = static_cast<double>(dm.responses()[i]);
    new_lr[i] = std::log(r_new + std::exp(st.eta[i]));
    dlog -= (yd + r_new) * new_lr[i] - (yd + r) * st.log_r_plus_mu[i];
  }
  dlog += log_inverse_gamma_density(r_new, prior) - log_inverse_gamma_density(r, prior);
  dlog += delta;  // Jacobian of r = exp(u)

  if (metropolis_accept(dlog, st.rng)) {
    ++st.accepted[s];
    ++st.window_accepted[s];
    st.params.r = r_new;
    st.lgamma_sum = lgamma_new;
    st.log_r_plus_mu.swap(new_lr);
  }
}

// phi -> c phi, sigma2 -> c^2 sigma2 with log c symmetric. The normal
// densities change by c^-I and the map has Jacobian c^(I+2), leaving c^2.
void update_phi_scale(ChainState& st, const SamplerModel& model) {
  if (model.phi_count() == 0) return;
  const DesignMatrix& dm = model.design();
  const std::size_t s = model.slot({Coordinate::Kind::kPhiScale, 0});
  std::normal_distribution<double> normal(0.0, st.proposal_sd[s]);
  const double u = normal(st.rng);
  const double c = std::exp(u);
  const double r = st.params.r;
  const double s2 = st.params.sigma2_phi;
  const double s2_new = s2 * c * c;

  ++st.attempted[s];
  ++st.window_attempted[s];
  if (!(s2_new > 0) || !std::isfinite(s2_new)) return;

  const std::size_t n = dm.rows();
  thread_local std::vector<double> new_eta, new_lr;
  new_eta.resize(n);
  new_lr.resize(n);
  double dlog = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = dm.responses()[i];
    const double eta = st.eta[i] + (c - 1.0) * st.params.phi[dm.groups()[i]];
    check_eta(eta, st, i);
    const double lr = std::log(r + std::exp(eta));
    new_eta[i] = eta;
    new_lr[i] = lr;
    dlog += row_term(y, eta, lr, r) - row_term(y, st.eta[i], st.log_r_plus_mu[i], r);
  }
  const auto& prior = model.priors().sigma2_phi;
  dlog += log_inverse_gamma_density(s2_new, prior) - log_inverse_gamma_density(s2, prior);
  dlog += 2.0 * u;

  if (metropolis_accept(dlog, st.rng)) {
    ++st.accepted[s];
    ++st.window_accepted[s];
    for (auto& v : st.params.phi) v *= c;
    st.params.sigma2_phi = s2_new;
    st.eta.swap(new_eta);
    st.log_r_plus_mu.swap(new_lr);
  }
}

}  // namespace

void mh_update_scalar(Coordinate coord, ChainState& state, const SamplerModel& model) {
  if (state.eta.size() != model.design().rows()) model.refresh(state);
  switch (coord.kind) {
    case Coordinate::Kind::kBeta:
      if (coord.index >= model.design().cols()) throw SpecError("beta index out of range", "sampler");
      update_beta(coord.index, state, model);
      break;
    case Coordinate::Kind::kPhi:
      if (coord.index >= model.phi_count()) throw SpecError("phi index out of range", "sampler");
      update_phi(coord.index, state, model);
      break;
    case Coordinate::Kind::kLogR:
      update_log_r(state, model);
      break;
    case Coordinate::Kind::kPhiScale:
      update_phi_scale(state, model);
      break;
  }
}

void adapt_scales(ChainState& state, double target) {
  ++state.windows_completed;
  const double delta = 0.1 / std::sqrt(static_cast<double>(state.windows_completed));
  for (std::size_t s = 0; s < state.proposal_sd.size(); ++s) {
    const auto tries = state.window_attempted[s];
    if (tries > 0) {
      const double rate =
          static_cast<double>(state.window_accepted[s]) / static_cast<double>(tries);
      if (rate > target) {
        state.proposal_sd[s] *= std::exp(delta);
      } else if (rate < target) {
        state.proposal_sd[s] *= std::exp(-delta);
      }
    }
    state.window_accepted[s] = 0;
    state.window_attempted[s] = 0;
  }
}

// --- chains ---------------------------------------------------------------

ChainResult run_chain(const SamplerModel& model, const SamplerConfig& cfg, std::uint64_t seed) {
  const DesignMatrix& dm = model.design();
  const std::size_t p = dm.cols();
  const std::size_t groups = model.phi_count();
  const bool sample_r = !cfg.fixed_r.has_value();

  std::vector<std::string> names(dm.columns().begin(), dm.columns().end());
  if (sample_r) names.emplace_back("r");
  if (model.random_effects()) names.emplace_back("sigma2_phi");
  if (model.random_effects() && cfg.store_phi) {
    for (std::size_t g = 0; g < groups; ++g) names.push_back(phi_name(g));
  }

  ChainResult result;
  result.seed = seed;
  result.trace = Trace(names);
  result.trace.reserve(cfg.trace_length());
  result.phi_mean.reserve(cfg.trace_length());
  result.phi_posterior_mean.assign(groups, 0.0);

  ChainState st = model.initial_state(seed, cfg.fixed_r);
  std::vector<std::size_t> beta_order(p);
  std::iota(beta_order.begin(), beta_order.end(), 0);
  std::vector<std::uint64_t> accepted_at_burnin, attempted_at_burnin;
  std::vector<double> draw(names.size());

  for (std::size_t t = 1; t <= cfg.n_iterations; ++t) {
    st.iteration = t;
    std::shuffle(beta_order.begin(), beta_order.end(), st.rng);
    for (auto k : beta_order) update_beta(k, st, model);
    for (std::size_t g = 0; g < groups; ++g) update_phi(g, st, model);
    if (sample_r) update_log_r(st, model);
    if (model.random_effects()) {
      st.params.sigma2_phi = gibbs_sigma2(st.params.phi, model.priors().sigma2_phi, st.rng);
      if (cfg.scale_move) update_phi_scale(st, model);
    }
    // Drops the rounding accumulated by incremental eta updates.
    model.refresh(st);

    if (t <= cfg.n_burnin && t % cfg.adapt_window == 0) adapt_scales(st, cfg.target_acceptance);
    if (t == cfg.n_burnin) {
      accepted_at_burnin = st.accepted;
      attempted_at_burnin = st.attempted;
    }
    if (t > cfg.n_burnin && (t - cfg.n_burnin) % cfg.thinning == 0) {
      std::size_t j = 0;
      for (double b : st.params.beta) draw[j++] = b;
      if (sample_r) draw[j++] = st.params.r;
      if (model.random_effects()) draw[j++] = st.params.sigma2_phi;
      if (model.random_effects() && cfg.store_phi) {
        for (double v : st.params.phi) draw[j++] = v;
      }
      result.trace.append(draw);
      double mean_phi = 0.0;
      for (double v : st.params.phi) mean_phi += v;
      result.phi_mean.push_back(groups ? mean_phi / static_cast<double>(groups) : 0.0);
      for (std::size_t g = 0; g < groups; ++g) result.phi_posterior_mean[g] += st.params.phi[g];
    }
  }
  if (result.trace.length() > 0) {
    for (auto& v : result.phi_posterior_mean) v /= static_cast<double>(result.trace.length());
  }

  const std::size_t slots = model.coordinate_count();
  if (accepted_at_burnin.empty()) {
    accepted_at_burnin.assign(slots, 0);
    attempted_at_burnin.assign(slots, 0);
  }
  for (std::size_t s = 0; s < slots; ++s) {
    if (!sample_r && s == model.slot({Coordinate::Kind::kLogR, 0})) continue;
    if (!(model.random_effects() && cfg.scale_move) &&
        s == model.slot({Coordinate::Kind::kPhiScale, 0})) {
      continue;
    }
    result.coordinate_names.push_back(model.coordinate_name(s));
    const auto tries = st.attempted[s] - attempted_at_burnin[s];
    const auto hits = st.accepted[s] - accepted_at_burnin[s];
    result.acceptance_rate.push_back(
        tries ? static_cast<double>(hits) / static_cast<double>(tries) : 0.0);
    result.final_proposal_sd.push_back(st.proposal_sd[s]);
  }
  return result;
}

std::vector<ChainResult> run_chains(const DesignMatrix& dm, const PriorSpec& priors,
                                    const SamplerConfig& cfg) {
  cfg.validate();
  const SamplerModel model(dm, priors, cfg.random_effects, cfg.centered_proposals);
  const auto seeds = cfg.resolved_seeds();
  std::vector<ChainResult> results(cfg.n_chains);

  if (!cfg.parallel_chains || cfg.n_chains == 1) {
    for (std::size_t c = 0; c < cfg.n_chains; ++c) results[c] = run_chain(model, cfg, seeds[c]);
    return results;
  }

  std::vector<std::exception_ptr> errors(cfg.n_chains);
  {
    std::vector<std::jthread> workers;
    workers.reserve(cfg.n_chains);
    for (std::size_t c = 0; c < cfg.n_chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          results[c] = run_chain(model, cfg, seeds[c]);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace crashre
