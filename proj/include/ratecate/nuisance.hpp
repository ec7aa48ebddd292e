#pragma once
// Cross-fitted nuisance models: leave-fold-out propensity (logistic) and
// per-arm outcome means (Poisson GLM or boosted trees), with the clipped
// per-row predictions the estimating equations consume.

#include <optional>
#include <variant>
#include <vector>

#include "ratecate/boosting.hpp"
#include "ratecate/dataset.hpp"
#include "ratecate/glm.hpp"

namespace ratecate {

enum class OutcomeLearner { glm, boosted };

struct NuisanceConfig {
  OutcomeLearner learner = OutcomeLearner::boosted;
  GlmConfig glm;
  BoostConfig boost;
  double clip_eps = 0.01;   // propensity clip
  double clip_mu = 1e-3;    // outcome clip to [clip_mu, 1/clip_mu]
};

struct OutcomeModel {
  std::variant<PoissonGlmModel, BoostedPoissonModel> model;

  // Unclipped mean predictions for row-major covariates.
  void predict(const std::vector<double>& z, std::size_t n, std::size_t d,
               std::vector<double>& out) const;
};

struct FoldModels {
  OutcomeModel mu0;
  OutcomeModel mu1;
  PropensityModel pi1;
};

struct NuisanceBundle {
  FoldPlan fold_plan;
  std::vector<FoldModels> per_fold;  // empty for oracle bundles
  NuisanceConfig config;

  // Cross-fitted per-row predictions: row i uses the model trained without
  // fold(i). Clipped to the configured ranges.
  std::vector<double> mu0_cf;
  std::vector<double> mu1_cf;
  std::vector<double> pi1_cf;

  // Test/oracle constructor: prediction arrays supplied directly.
  static NuisanceBundle from_predictions(std::vector<double> mu0, std::vector<double> mu1,
                                         std::vector<double> pi1);
};

// Fits mu0 on control rows outside each fold, mu1 on treated rows outside,
// pi1 on all rows outside; predictions for fold-k rows come from model (-k).
// Throws when a fold complement lacks one arm.
NuisanceBundle fit_nuisance_bundle(const ObservationalDataset& ds, const FoldPlan& plan,
                                   const NuisanceConfig& cfg = {});

}  // namespace ratecate
