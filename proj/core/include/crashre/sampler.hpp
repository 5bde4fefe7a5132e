#ifndef CRASHRE_SAMPLER_HPP_
#define CRASHRE_SAMPLER_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "crashre/model.hpp"
#include "crashre/rng.hpp"
#include "crashre/trace.hpp"

namespace crashre {

struct SamplerConfig {
  std::size_t n_chains = 2;
  std::size_t n_iterations = 20000;  // including burn-in
  std::size_t n_burnin = 2000;
  std::size_t thinning = 1;
  std::size_t adapt_window = 50;     // adaptation only during burn-in
  double target_acceptance = 0.44;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> chain_seeds;  // empty: derived from `seed`

  bool random_effects = true;
  std::optional<double> fixed_r;  // hold r constant instead of sampling it
  bool store_phi = false;
  // Propose each slope move together with the intercept shift that keeps
  // the linear predictor fixed at the column mean. Same target, far less
  // intercept/slope correlation for uncentered covariates.
  bool centered_proposals = true;
  // After the sigma2 draw, one joint move phi -> c phi, sigma2 -> c^2
  // sigma2 (log c random walk). Leaves the target unchanged and unsticks
  // sigma2 when the random effect is weakly identified.
  bool scale_move = true;
  bool parallel_chains = true;

  void validate() const;  // throws SpecError
  std::vector<std::uint64_t> resolved_seeds() const;
  std::size_t trace_length() const { return (n_iterations - n_burnin) / thinning; }
};

struct Coordinate {
  enum class Kind { kBeta, kPhi, kLogR, kPhiScale };
  Kind kind;
  std::size_t index = 0;
};

struct ChainState {
  Parameters params;
  // Indexed beta[0..p), phi[0..I), log r, phi scale.
  std::vector<double> proposal_sd;
  std::vector<std::uint64_t> accepted;
  std::vector<std::uint64_t> attempted;
  std::vector<std::uint64_t> window_accepted;
  std::vector<std::uint64_t> window_attempted;
  std::size_t iteration = 0;
  std::size_t windows_completed = 0;
  Rng rng;

  // Per design row: eta = beta.x + phi and log(r + exp(eta)).
  std::vector<double> eta;
  std::vector<double> log_r_plus_mu;
  // sum_rows [lgamma(y + r) - lgamma(r)] at the current r.
  double lgamma_sum = 0.0;
};

// Precomputed structure of one design/prior pair shared read-only by the
// chains that sample it.
class SamplerModel {
 public:
  SamplerModel(const DesignMatrix& dm, const PriorSpec& priors, bool random_effects,
               bool centered_proposals);

  const DesignMatrix& design() const { return *dm_; }
  const PriorSpec& priors() const { return priors_; }
  bool random_effects() const { return random_effects_; }

  std::size_t coordinate_count() const { return dm_->cols() + phi_count() + 2; }
  std::size_t phi_count() const { return random_effects_ ? dm_->group_count() : 0; }
  std::size_t slot(Coordinate c) const;
  std::string coordinate_name(std::size_t slot) const;

  // Starting point and proposal scales (see ChainState).
  ChainState initial_state(std::uint64_t seed, std::optional<double> fixed_r) const;
  // Recomputes eta, log(r + mu) and the lgamma sum from the parameters.
  void refresh(ChainState& state) const;

  // Internal accessors used by the update kernels.
  std::span<const std::size_t> rows_of_group(std::size_t g) const { return group_rows_[g]; }
  std::optional<std::size_t> intercept() const { return intercept_; }
  double proposal_center(std::size_t k) const { return centers_[k]; }
  double lgamma_sum(double r) const;

 private:
  const DesignMatrix* dm_;
  PriorSpec priors_;
  bool random_effects_;
  std::optional<std::size_t> intercept_;
  std::vector<double> centers_;  // 0 where proposals are not centered
  std::vector<std::vector<std::size_t>> group_rows_;
  std::vector<std::pair<std::int64_t, std::size_t>> response_histogram_;
};

// sigma2 ~ InverseGamma(shape + I/2, scale + sum(phi^2)/2).
double gibbs_sigma2(std::span<const double> phi, InverseGammaPrior prior, Rng& rng);

inline bool metropolis_accept(double log_ratio, Rng& rng) {
  if (log_ratio >= 0) return true;
  if (std::isnan(log_ratio)) return false;
  return std::log(std::generate_canonical<double, 53>(rng)) < log_ratio;
}

// Gaussian random-walk Metropolis step on one real coordinate with
// symmetric proposal; `log_target` may return -inf outside the support.
template <class LogTarget>
double random_walk_step(double x, double sd, LogTarget&& log_target, Rng& rng,
                        bool* accepted = nullptr) {
  std::normal_distribution<double> normal(0.0, sd);
  const double proposal = x + normal(rng);
  const bool ok = metropolis_accept(log_target(proposal) - log_target(x), rng);
  if (accepted) *accepted = ok;
  return ok ? proposal : x;
}

// One random-walk Metropolis update of `coord` (log scale for r; for
// kPhiScale the joint phi/sigma2 scaling, a no-op without phi). The
// proposal sd is state.proposal_sd[slot]. Throws NumericError if the
// current state has a non-finite posterior, DivergenceError if a
// proposal overflows the linear predictor.
void mh_update_scalar(Coordinate coord, ChainState& state, const SamplerModel& model);

// End-of-window tuning: scale each proposal sd by exp(+/-delta), delta =
// 0.1 / sqrt(windows completed), toward `target` acceptance; coordinates
// exactly on target are left alone. Resets the window counters.
void adapt_scales(ChainState& state, double target);

struct ChainResult {
  std::uint64_t seed = 0;
  Trace trace;
  std::vector<double> phi_mean;  // mean(phi) at each stored draw
  std::vector<double> phi_posterior_mean;  // per group, over stored draws
  std::vector<std::string> coordinate_names;
  std::vector<double> acceptance_rate;  // post-burn-in, per coordinate
  std::vector<double> final_proposal_sd;
};

// Runs one chain: per iteration all beta (random scan), all phi
// (ascending), log r, the sigma2 Gibbs draw and, if enabled, the phi scale move.
ChainResult run_chain(const SamplerModel& model, const SamplerConfig& cfg,
                      std::uint64_t seed);

// cfg.n_chains independent chains, concurrently when cfg.parallel_chains.
// Bit-reproducible for fixed seeds.
std::vector<ChainResult> run_chains(const DesignMatrix& dm, const PriorSpec& priors,
                                    const SamplerConfig& cfg);

}  // namespace crashre

#endif  // CRASHRE_SAMPLER_HPP_
