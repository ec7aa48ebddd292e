#pragma once
// Validation-set machinery: empirical quantile thresholds of a CATE score,
// doubly robust subgroup rate ratios AD(c), the validation curve over a
// q-grid, and population-level ratio-monotonicity checks.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ratecate/dataset.hpp"
#include "ratecate/nuisance.hpp"

namespace ratecate {

struct SubgroupAdEstimate {
  double c = 0.0;
  std::size_t m_c = 0;
  double mu1_hat = 0.0;
  double mu0_hat = 0.0;
  double ad = 0.0;
};

struct CurvePoint {
  double q = 0.0;
  double threshold = 0.0;
  std::optional<SubgroupAdEstimate> estimate;  // absent when the subgroup is too small
};

struct ValidationCurve {
  std::vector<CurvePoint> grid;
  std::string score_name;
};

struct AdConfig {
  std::size_t min_subgroup_size = 50;
  std::size_t min_per_arm = 10;
  OutcomeLearner learner = OutcomeLearner::glm;  // subgroup outcome models
  GlmConfig glm;
  BoostConfig boost;
  double clip_eps = 0.01;
};

inline constexpr double kWholePopulationThreshold = -std::numeric_limits<double>::infinity();

// Smallest score s with H(s) >= 1-q under the >=-inclusion convention, so the
// top-q subgroup has at least ceil(n*q) members under ties. q=1 returns the
// whole-population sentinel.
double quantile_threshold(const std::vector<double>& scores, double q);

// Doubly robust subgroup means and their ratio: propensity and per-arm
// outcome models are refit within {i : score_i >= c}.
SubgroupAdEstimate estimate_ad(const ObservationalDataset& ds,
                               const std::vector<double>& scores, double c,
                               const AdConfig& cfg = {});

ValidationCurve validation_curve(const ObservationalDataset& ds,
                                 const std::vector<double>& scores,
                                 const std::vector<double>& q_grid, const AdConfig& cfg = {});

std::vector<double> default_q_grid();  // {0.1, 0.2, ..., 1.0}

// ---------------------------------------------------------------------------
// Population checks on a finite support.

struct DiscreteDgp {
  std::vector<double> prob;
  std::vector<double> mu1;
  std::vector<double> mu0;
};

struct Theorem2Report {
  std::vector<double> c_grid;
  std::vector<double> ad;       // population AD(c), ranking by true D
  bool monotone = false;        // AD non-decreasing in c
  bool ad_ge_c = false;         // AD(c) >= c on the grid
  double max_violation = 0.0;
};

// Exact summation over the support; c_grid entries above max D are skipped.
Theorem2Report check_theorem2(const DiscreteDgp& dgp, const std::vector<double>& c_grid,
                              double tol = 1e-10);

// Binary-outcome odds-ratio construction where ratio-style monotonicity
// fails: returns the marginal OR of the top-k patients ranked by conditional
// OR, and the maximum marginal OR over all k-subsets (exact Pareto sweep).
struct OrExampleReport {
  double top_by_conditional = 0.0;
  double best_subgroup = 0.0;
};
OrExampleReport or_counterexample(std::size_t n_patients = 100, std::size_t subgroup = 10);

}  // namespace ratecate
