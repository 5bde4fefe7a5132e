#include "crashre/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "crashre/errors.hpp"
#include "crashre/negbin.hpp"

namespace crashre {

void PriorSpec::validate() const {
  if (!(beta_variance > 0)) throw SpecError("beta prior variance must be positive", "model_core");
  for (const auto& ig : {r, sigma2_phi}) {
    if (!(ig.shape > 0) || !(ig.scale > 0)) {
      throw SpecError("inverse-gamma shape and scale must be positive", "model_core");
    }
  }
}

void check_dimensions(const DesignMatrix& dm, const Parameters& params) {
  if (params.beta.size() != dm.cols()) {
    throw SpecError("beta has " + std::to_string(params.beta.size()) +
                        " entries, design has " + std::to_string(dm.cols()) + " columns",
                    "model_core");
  }
  if (params.has_random_effects() && params.phi.size() != dm.group_count()) {
    throw SpecError("phi has " + std::to_string(params.phi.size()) +
                        " entries, design has " + std::to_string(dm.group_count()) +
                        " groups",
                    "model_core");
  }
  if (!(params.r > 0)) throw DomainError("dispersion r must be positive", "model_core");
  if (params.has_random_effects() && !(params.sigma2_phi > 0)) {
    throw DomainError("sigma2_phi must be positive", "model_core");
  }
}

double linear_predictor_log(const DesignRow& row, const Parameters& params) {
  double eta = 0.0;
  for (std::size_t k = 0; k < row.x.size(); ++k) {
    if (!std::isfinite(row.x[k])) {
      throw NumericError("non-finite covariate in column " + std::to_string(k));
    }
    eta += params.beta[k] * row.x[k];
  }
  if (params.has_random_effects()) eta += params.phi[row.group];
  if (!(std::abs(eta) <= kMaxLinearPredictor)) {
    std::ostringstream state;
    state << "eta=" << eta << " group=" << row.group << " beta=[";
    for (std::size_t k = 0; k < params.beta.size(); ++k) {
      state << (k ? "," : "") << params.beta[k];
    }
    state << "]";
    if (params.has_random_effects()) state << " phi=" << params.phi[row.group];
    throw DivergenceError("linear predictor outside [-700, 700]", state.str());
  }
  return eta;
}

double linear_predictor(const DesignRow& row, const Parameters& params) {
  return std::exp(linear_predictor_log(row, params));
}

double log_likelihood(const DesignMatrix& dm, const Parameters& params) {
  check_dimensions(dm, params);
  double sum = 0.0;
  for (std::size_t i = 0; i < dm.rows(); ++i) {
    const auto row = dm.row(i);
    sum += nb_log_pmf(row.response, {linear_predictor(row, params), params.r});
  }
  return sum;
}

double log_normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double log_inverse_gamma_density(double x, InverseGammaPrior prior) {
  if (!(x > 0)) return -INFINITY;
  return prior.shape * std::log(prior.scale) - log_gamma(prior.shape) -
         (prior.shape + 1.0) * std::log(x) - prior.scale / x;
}

double log_prior(const Parameters& params, const PriorSpec& priors) {
  double sum = 0.0;
  for (double b : params.beta) sum += log_normal_density(b, 0.0, priors.beta_variance);
  if (params.has_random_effects()) {
    for (double p : params.phi) sum += log_normal_density(p, 0.0, params.sigma2_phi);
    sum += log_inverse_gamma_density(params.sigma2_phi, priors.sigma2_phi);
  }
  sum += log_inverse_gamma_density(params.r, priors.r);
  return sum;
}

double log_posterior(const DesignMatrix& dm, const Parameters& params,
                     const PriorSpec& priors) {
  return log_likelihood(dm, params) + log_prior(params, priors);
}

}  // namespace crashre
