#pragma once
// Calibrated two-regression estimator: inverse-propensity-weighted
// calibration of the initial outcome predictions, then an unweighted
// Poisson-score projection of the calibrated means onto the log-linear
// working model in each arm. Also the naive per-arm baseline.

#include <string>
#include <vector>

#include "ratecate/dataset.hpp"
#include "ratecate/glm.hpp"
#include "ratecate/nuisance.hpp"

namespace ratecate {

struct ArmCalibration {
  double alpha = 0.0;                     // coefficient on log mu_hat
  std::vector<double> gamma;              // coefficients on ztilde
  std::vector<std::size_t> dropped_gamma; // collinear ztilde columns pinned to 0
  IrlsReport report;
};

struct CalibrationFit {
  ArmCalibration arm0;
  ArmCalibration arm1;
  std::string source;  // which initial learner produced mu_hat
};

struct TwoRegressionFit {
  std::vector<double> beta0;
  std::vector<double> beta1;
  CalibrationFit calibration;

  std::vector<double> delta_implied() const;
};

struct CalibrationResult {
  ArmCalibration cal;
  std::vector<double> mu_tilde;  // calibrated predictions on all rows
};

// Solves the weighted equation sum_i W_i(r) ztilde_i (y_i - exp[alpha log
// mu_hat_r(z_i) + gamma^T ztilde_i]) = 0 with cross-fitted IPW weights.
// extra_weight multiplies W_i(r) (IPCW use); empty means 1.
CalibrationResult calibrate(const ObservationalDataset& ds, const NuisanceBundle& bundle,
                            int arm, const std::vector<double>& extra_weight = {},
                            const GlmConfig& cfg = {});

// Unweighted Poisson-score projection of mu_tilde over the full sample.
std::vector<double> project(const DesignMatrix& X, const std::vector<double>& mu_tilde,
                            const GlmConfig& cfg = {});

TwoRegressionFit fit_two_regression(const ObservationalDataset& ds,
                                    const NuisanceBundle& bundle, const GlmConfig& cfg = {});

// Per-arm unweighted Poisson GLM on observed rows; no adjustment.
TwoRegressionFit fit_naive(const ObservationalDataset& ds, const GlmConfig& cfg = {});

}  // namespace ratecate
