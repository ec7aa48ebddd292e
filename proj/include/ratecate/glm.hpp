#pragma once
// IRLS fits for the two working GLMs: Bernoulli-logit (propensity score)
// and Poisson-log (outcome means, calibration and projection equations).
// Solutions satisfy their raw score equations to max-norm <= tol.

#include <vector>

#include "ratecate/dataset.hpp"

namespace ratecate {

struct GlmConfig {
  double tol = 1e-8;      // max-norm of the unnormalized score at the solution
  int max_iter = 100;
  double ridge_scale = 1e-4;  // separation fallback: lambda = ridge_scale * n
};

struct IrlsReport {
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
  bool ridge_applied = false;
  std::vector<std::size_t> dropped_columns;  // exactly-collinear columns, coef pinned to 0
};

struct PropensityModel {
  std::vector<double> coefficients;  // intercept first
  double clip_eps = 0.01;
  IrlsReport report;

  // P(R=1|z) clipped to [clip_eps, 1-clip_eps].
  void predict(const DesignMatrix& X, std::vector<double>& out) const;
};

struct PoissonGlmModel {
  std::vector<double> coefficients;
  IrlsReport report;

  // exp(beta^T x), unclipped.
  void predict(const DesignMatrix& X, std::vector<double>& out) const;
};

// Columns that are exactly collinear with earlier ones are dropped (their
// coefficient is 0 and they are listed in the report); quasi-separation
// triggers a ridge-regularized refit.
PropensityModel fit_logistic(const DesignMatrix& X, const std::vector<double>& r01,
                             const GlmConfig& cfg = {});

// Weighted Poisson score equation sum_i w_i x_i (y_i - exp(beta^T x_i)) = 0.
// Pass empty weights for the unweighted fit. Requires sum w_i y_i > 0.
PoissonGlmModel fit_poisson_glm(const DesignMatrix& X, const std::vector<double>& y,
                                const std::vector<double>& weights = {},
                                const GlmConfig& cfg = {});

// Indices of a maximal prefix-greedy independent subset of X's columns
// (modified Gram-Schmidt, relative threshold).
std::vector<std::size_t> independent_columns(const DesignMatrix& X, double rel_tol = 1e-7);

}  // namespace ratecate
