#ifndef CRASHRE_MODEL_HPP_
#define CRASHRE_MODEL_HPP_

#include <vector>

#include "crashre/design.hpp"

namespace crashre {

struct InverseGammaPrior {
  double shape = 1e-3;
  double scale = 1e-3;
};

// beta_k ~ N(0, beta_variance); r, sigma2_phi ~ InverseGamma(shape, scale).
struct PriorSpec {
  double beta_variance = 1e5;
  InverseGammaPrior r;
  InverseGammaPrior sigma2_phi;

  void validate() const;  // throws SpecError
};

// beta aligned with the design columns; phi has one entry per group, or
// is empty for the fixed-effects model (no random intercept).
struct Parameters {
  std::vector<double> beta;
  std::vector<double> phi;
  double r = 1.0;
  double sigma2_phi = 1.0;

  bool has_random_effects() const { return !phi.empty(); }
};

// Linear predictors beyond this magnitude are treated as divergence.
inline constexpr double kMaxLinearPredictor = 700.0;

// beta . x + phi_group. Throws NumericError on a non-finite covariate and
// DivergenceError when |eta| exceeds kMaxLinearPredictor.
double linear_predictor_log(const DesignRow& row, const Parameters& params);
// exp of the above: the expected count theta.
double linear_predictor(const DesignRow& row, const Parameters& params);

double log_likelihood(const DesignMatrix& dm, const Parameters& params);

double log_normal_density(double x, double mean, double variance);
double log_inverse_gamma_density(double x, InverseGammaPrior prior);

// Sum of all prior terms: beta normals, the random-effect normals (when
// phi is present) and the inverse-gamma densities of r and sigma2_phi.
double log_prior(const Parameters& params, const PriorSpec& priors);

// Unnormalized log posterior: log_likelihood + log_prior.
double log_posterior(const DesignMatrix& dm, const Parameters& params,
                     const PriorSpec& priors);

// Throws SpecError when parameter dimensions disagree with the design.
void check_dimensions(const DesignMatrix& dm, const Parameters& params);

}  // namespace crashre

#endif  // CRASHRE_MODEL_HPP_
