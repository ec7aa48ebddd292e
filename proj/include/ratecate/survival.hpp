#pragma once
// Censored time-to-event extension: the CATE metric is the ratio of
// restricted mean time lost E[tau - T^tau]. Estimating equations are the
// count-outcome ones on the transformed outcome, IPCW-weighted with per-arm
// Kaplan-Meier censoring models.

#include <cstdint>
#include <optional>
#include <vector>

#include "ratecate/contrast.hpp"
#include "ratecate/dataset.hpp"
#include "ratecate/glm.hpp"
#include "ratecate/validate.hpp"

namespace ratecate {

// Kaplan-Meier estimate of the censoring-time survival function (event and
// censoring roles swapped), floored away from zero.
struct KaplanMeier {
  std::vector<double> times;   // distinct drop times, ascending
  std::vector<double> surv;    // right-continuous value at each drop time
  double floor_eps = 0.05;
  mutable long floored_evals = 0;

  double eval(double t) const;  // P(C > t), floored at floor_eps
};

struct CensoringModel {
  KaplanMeier arm0;
  KaplanMeier arm1;
  const KaplanMeier& for_arm(int r) const { return r == 1 ? arm1 : arm0; }
};

KaplanMeier fit_km(const std::vector<double>& times, const std::vector<int>& events,
                   double floor_eps = 0.05);

// Per-arm censoring KM on (x_i, 1 - delta_i).
CensoringModel fit_censoring_km(const ObservationalDataset& ds, double floor_eps = 0.05);
KaplanMeier fit_censoring_km_arm(const ObservationalDataset& ds, int arm,
                                 double floor_eps = 0.05);

// L_i = 1{T^tau observed uncensored} / K_C(T^tau), with the indicator
// Delta + (1-Delta) 1{X >= tau}.
double ipcw_weight(double x, int status, const KaplanMeier& censoring, double tau);

struct RmtlConfig {
  double tau = 0.0;               // required
  std::size_t folds = 7;
  int replicates = 3;
  std::uint64_t seed = 0;
  bool symmetric = true;
  double floor_eps = 0.05;
  double eta_cap = 20.0;          // RMST working-model coefficient bound
  GlmConfig glm;
  ContrastSolverConfig solver;
};

struct RmstModel {
  std::vector<double> eta;        // coefficients on the basis (ztilde)
  bool capped = false;
  IrlsReport report;

  // E(tau - T^tau | z) = tau / (1 + exp(eta^T b(z))).
  void predict_rmtl(const DesignMatrix& B, double tau, std::vector<double>& out) const;
};

// Solves sum_i 1{r_i = arm} L_i b(z_i) {T_i^tau - tau expit(eta^T b(z_i))} = 0.
RmstModel fit_rmst_regression(const DesignMatrix& B, const std::vector<double>& t_tau,
                              const std::vector<double>& ipcw,
                              const std::vector<char>& in_arm, double tau,
                              double eta_cap = 20.0, const GlmConfig& cfg = {});

// Per-row inputs shared by the survival estimators.
struct RmtlWorkspace {
  std::vector<double> y_rmtl;     // tau - T^tau (0 where unobserved)
  std::vector<double> ipcw;       // L_i, 0 for rows censored before tau
  std::vector<double> mu0_cf;     // cross-fitted RMTL means
  std::vector<double> mu1_cf;
  std::vector<double> pi1_cf;
};

// Cross-fitted survival nuisances: per fold complement, per-arm censoring KM,
// per-arm RMST working model, logistic propensity.
RmtlWorkspace fit_rmtl_nuisances(const ObservationalDataset& ds, const FoldPlan& plan,
                                 const RmtlConfig& cfg);

// IPCW-weighted contrast regression on the RMTL outcome; same Newton
// machinery and sandwich as the count path.
ContrastFit solve_rmtl_contrast(const ObservationalDataset& ds, const RmtlWorkspace& work,
                                const RmtlConfig& cfg);
ContrastFit fit_rmtl_contrast(const ObservationalDataset& ds, const RmtlConfig& cfg);

// Two-regression analogue: calibration weighted by L_i * W_i(r), projection
// unweighted; initial predictor is the RMST working model.
struct RmtlTwoRegressionFit {
  std::vector<double> beta0;
  std::vector<double> beta1;
};
RmtlTwoRegressionFit fit_rmtl_two_regression(const ObservationalDataset& ds,
                                             const RmtlWorkspace& work,
                                             const RmtlConfig& cfg);

// Naive per-arm working model exp(beta^T ztilde) for the RMTL, IPCW-weighted
// within arm (marginal KM censoring).
RmtlTwoRegressionFit fit_rmtl_naive(const ObservationalDataset& ds, double tau,
                                    double floor_eps = 0.05, const GlmConfig& cfg = {});

// Subgroup validation curve for the RMTL ratio; models refit within each
// subgroup as in the count path, augmented means IPCW-corrected.
ValidationCurve rmtl_validation_curve(const ObservationalDataset& ds,
                                      const std::vector<double>& scores, double tau,
                                      const std::vector<double>& q_grid,
                                      const AdConfig& cfg = {}, double floor_eps = 0.05);

// Scalar-covariate Cox partial-likelihood fit (no censoring), Newton on the
// score; O(n log n).
double cox_scalar_fit(const std::vector<double>& z, const std::vector<double>& times);

// Piecewise-hazard construction where per-arm Cox fits report spurious
// heterogeneity although the hazard ratio is constant.
struct SpuriousHrReport {
  double beta1 = 0.0;
  double beta0 = 0.0;
};
SpuriousHrReport check_spurious_hr(std::size_t n, std::uint64_t seed);

}  // namespace ratecate
