#pragma once
// Gradient boosting with depth-2 regression trees and Poisson likelihood:
// stagewise fit to gradient residuals, leaf values log(sum w*y / sum w*mu)
// on the log-rate scale. Tree count fixed or chosen by 5-fold CV deviance.

#include <cstdint>
#include <optional>
#include <vector>

namespace ratecate {

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // go left when z[feature] <= threshold
  double value = 0.0;      // leaf increment, log scale
  int left = -1;
  int right = -1;
};

using Tree = std::vector<TreeNode>;

struct BoostConfig {
  int depth = 2;
  double learning_rate = 0.1;
  std::optional<int> n_trees;       // unset: select by cross-validated deviance
  int cv_folds = 5;
  std::vector<int> candidate_trees = {10, 16, 25, 40, 63, 100, 158, 251, 398, 500};
  int min_leaf = 5;
  double leaf_clamp = 4.0;
  std::uint64_t seed = 0;           // CV fold shuffling
};

struct BoostedPoissonModel {
  double base_score = 0.0;          // log of weighted training mean
  double learning_rate = 0.1;
  std::vector<Tree> trees;
  int cv_selected_trees = -1;       // -1 when the count was fixed by config

  // mu(z) = exp(base + lr * sum of leaf values); z row-major n x d.
  void predict(const std::vector<double>& z, std::size_t n, std::size_t d,
               std::vector<double>& out) const;
  double predict_row(const double* zrow, std::size_t d) const;
};

// z row-major n x d, y >= 0, optional positive weights. Throws on degenerate
// outcomes (sum w*y == 0) or n < 10.
BoostedPoissonModel fit_boosted_poisson(const std::vector<double>& z, std::size_t n,
                                        std::size_t d, const std::vector<double>& y,
                                        const std::vector<double>& weights = {},
                                        const BoostConfig& cfg = {});

// Total Poisson deviance 2 sum w [y log(y/mu) - (y - mu)].
double poisson_deviance(const std::vector<double>& y, const std::vector<double>& mu,
                        const std::vector<double>& weights = {});

}  // namespace ratecate
