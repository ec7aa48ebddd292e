#include "ratecate/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ratecate/util.hpp"

namespace ratecate {

double poisson_deviance(const std::vector<double>& y, const std::vector<double>& mu,
                        const std::vector<double>& weights) {
  double dev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    dev += w * ((y[i] > 0.0 ? y[i] * std::log(y[i] / mu[i]) : 0.0) - (y[i] - mu[i]));
  }
  return 2.0 * dev;
}

namespace {

struct SplitResult {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Weighted least-squares split search over the node's members, scanning each
// feature in globally presorted order. Ties resolve to the lowest feature
// index, then the lowest threshold (strict > on gain, ascending scan).
SplitResult best_split(const std::vector<std::vector<std::size_t>>& sorted_idx,
                       const std::vector<double>& z, std::size_t d,
                       const std::vector<double>& resp, const std::vector<double>& w,
                       const std::vector<char>& in_node, double w_total, double s_total,
                       std::size_t n_node, int min_leaf) {
  SplitResult best;
  if (n_node < static_cast<std::size_t>(2 * min_leaf)) return best;
  const double base = s_total * s_total / w_total;
  for (std::size_t f = 0; f < d; ++f) {
    double wl = 0.0, sl = 0.0;
    std::size_t cl = 0;
    double prev_val = 0.0;
    bool have_prev = false;
    for (const std::size_t i : sorted_idx[f]) {
      if (!in_node[i]) continue;
      const double v = z[i * d + f];
      if (have_prev && v > prev_val && cl >= static_cast<std::size_t>(min_leaf) &&
          n_node - cl >= static_cast<std::size_t>(min_leaf)) {
        const double wr = w_total - wl;
        if (wl > 0.0 && wr > 0.0) {
          const double sr = s_total - sl;
          const double gain = sl * sl / wl + sr * sr / wr - base;
          if (gain > best.gain + 1e-12) {
            best.found = true;
            best.feature = static_cast<int>(f);
            best.threshold = 0.5 * (prev_val + v);
            best.gain = gain;
          }
        }
      }
      wl += w[i];
      sl += w[i] * resp[i];
      ++cl;
      prev_val = v;
      have_prev = true;
    }
  }
  return best;
}

Tree fit_tree(const std::vector<std::vector<std::size_t>>& sorted_idx,
              const std::vector<double>& z, std::size_t n, std::size_t d,
              const std::vector<double>& resp, const std::vector<double>& w,
              const std::vector<double>& y, const std::vector<double>& mu,
              const BoostConfig& cfg) {
  Tree tree;
  struct Pending {
    int node;
    int depth;
    std::vector<char> mask;
    double w_total, s_total;
    std::size_t count;
  };

  std::vector<char> root_mask(n, 1);
  double w_total = 0.0, s_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w_total += w[i];
    s_total += w[i] * resp[i];
  }
  tree.push_back(TreeNode{});
  std::vector<Pending> stack;
  stack.push_back({0, 0, std::move(root_mask), w_total, s_total, n});

  auto leaf_value = [&](const std::vector<char>& mask) {
    double sy = 0.0, sm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      sy += w[i] * y[i];
      sm += w[i] * mu[i];
    }
    if (!(sm > 0.0)) return 0.0;
    const double v = std::log((sy + 1e-12) / (sm + 1e-12));
    return std::clamp(v, -cfg.leaf_clamp, cfg.leaf_clamp);
  };

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    SplitResult split;
    if (cur.depth < cfg.depth) {
      split = best_split(sorted_idx, z, d, resp, w, cur.mask, cur.w_total, cur.s_total,
                         cur.count, cfg.min_leaf);
    }
    if (!split.found) {
      tree[cur.node].feature = -1;
      tree[cur.node].value = leaf_value(cur.mask);
      continue;
    }
    std::vector<char> left_mask(n, 0), right_mask(n, 0);
    double wl = 0.0, sl = 0.0;
    std::size_t cl = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!cur.mask[i]) continue;
      if (z[i * d + split.feature] <= split.threshold) {
        left_mask[i] = 1;
        wl += w[i];
        sl += w[i] * resp[i];
        ++cl;
      } else {
        right_mask[i] = 1;
      }
    }
    const int li = static_cast<int>(tree.size());
    tree.push_back(TreeNode{});
    const int ri = static_cast<int>(tree.size());
    tree.push_back(TreeNode{});
    tree[cur.node].feature = split.feature;
    tree[cur.node].threshold = split.threshold;
    tree[cur.node].left = li;
    tree[cur.node].right = ri;
    stack.push_back({ri, cur.depth + 1, std::move(right_mask), cur.w_total - wl,
                     cur.s_total - sl, cur.count - cl});
    stack.push_back({li, cur.depth + 1, std::move(left_mask), wl, sl, cl});
  }
  return tree;
}

double tree_leaf_value(const Tree& tree, const double* zrow) {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = zrow[tree[node].feature] <= tree[node].threshold ? tree[node].left
                                                            : tree[node].right;
  }
  return tree[node].value;
}

BoostedPoissonModel fit_fixed(const std::vector<double>& z, std::size_t n, std::size_t d,
                              const std::vector<double>& y, const std::vector<double>& w,
                              int n_trees, const BoostConfig& cfg,
                              const std::vector<std::vector<std::size_t>>& sorted_idx) {
  BoostedPoissonModel model;
  model.learning_rate = cfg.learning_rate;
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  double wy = 0.0;
  for (std::size_t i = 0; i < n; ++i) wy += w[i] * y[i];
  model.base_score = std::log(wy / wsum);

  std::vector<double> F(n, model.base_score), mu(n), resp(n);
  for (int t = 0; t < n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      mu[i] = std::exp(F[i]);
      resp[i] = y[i] - mu[i];
    }
    Tree tree = fit_tree(sorted_idx, z, n, d, resp, w, y, mu, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      F[i] += cfg.learning_rate * tree_leaf_value(tree, &z[i * d]);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace

void BoostedPoissonModel::predict(const std::vector<double>& z, std::size_t n,
                                  std::size_t d, std::vector<double>& out) const {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict_row(&z[i * d], d);
}

double BoostedPoissonModel::predict_row(const double* zrow, std::size_t) const {
  double f = base_score;
  for (const auto& tree : trees) f += learning_rate * tree_leaf_value(tree, zrow);
  return std::exp(f);
}

BoostedPoissonModel fit_boosted_poisson(const std::vector<double>& z, std::size_t n,
                                        std::size_t d, const std::vector<double>& y,
                                        const std::vector<double>& weights,
                                        const BoostConfig& cfg) {
  if (n < 10) throw std::invalid_argument("fit_boosted_poisson: need n >= 10");
  if (y.size() != n || z.size() != n * d) {
    throw std::invalid_argument("fit_boosted_poisson: size mismatch");
  }
  std::vector<double> w = weights.empty() ? std::vector<double>(n, 1.0) : weights;
  double wy = 0.0;
  for (std::size_t i = 0; i < n; ++i) wy += w[i] * y[i];
  if (!(wy > 0.0)) throw std::invalid_argument("fit_boosted_poisson: all outcomes zero");

  std::vector<std::vector<std::size_t>> sorted_idx(d);
  for (std::size_t f = 0; f < d; ++f) {
    sorted_idx[f].resize(n);
    std::iota(sorted_idx[f].begin(), sorted_idx[f].end(), std::size_t{0});
    std::stable_sort(sorted_idx[f].begin(), sorted_idx[f].end(),
                     [&](std::size_t a, std::size_t b) { return z[a * d + f] < z[b * d + f]; });
  }

  if (cfg.n_trees) {
    return fit_fixed(z, n, d, y, w, *cfg.n_trees, cfg, sorted_idx);
  }

  // 5-fold CV over the candidate grid: one staged fit per fold, held-out
  // deviance tracked incrementally.
  const int max_trees = cfg.candidate_trees.back();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = make_rng(cfg.seed, Stream::boost_cv);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % cfg.cv_folds);

  std::vector<double> cv_dev(cfg.candidate_trees.size(), 0.0);
  for (int k = 0; k < cfg.cv_folds; ++k) {
    std::vector<std::size_t> tr;
    std::vector<std::size_t> te;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == k ? te : tr).push_back(i);
    std::vector<double> ztr(tr.size() * d), ytr(tr.size()), wtr(tr.size());
    for (std::size_t a = 0; a < tr.size(); ++a) {
      std::copy_n(&z[tr[a] * d], d, &ztr[a * d]);
      ytr[a] = y[tr[a]];
      wtr[a] = w[tr[a]];
    }
    std::vector<std::vector<std::size_t>> sidx(d);
    for (std::size_t f = 0; f < d; ++f) {
      sidx[f].resize(tr.size());
      std::iota(sidx[f].begin(), sidx[f].end(), std::size_t{0});
      std::stable_sort(sidx[f].begin(), sidx[f].end(), [&](std::size_t a, std::size_t b) {
        return ztr[a * d + f] < ztr[b * d + f];
      });
    }
    double wsum = 0.0, wysum = 0.0;
    for (std::size_t a = 0; a < tr.size(); ++a) {
      wsum += wtr[a];
      wysum += wtr[a] * ytr[a];
    }
    if (!(wysum > 0.0)) continue;
    const double base = std::log(wysum / wsum);
    std::vector<double> F(tr.size(), base), mu(tr.size()), resp(tr.size());
    std::vector<double> Fte(te.size(), base);
    std::size_t gi = 0;
    for (int t = 0; t < max_trees && gi < cfg.candidate_trees.size(); ++t) {
      for (std::size_t a = 0; a < tr.size(); ++a) {
        mu[a] = std::exp(F[a]);
        resp[a] = ytr[a] - mu[a];
      }
      Tree tree = fit_tree(sidx, ztr, tr.size(), d, resp, wtr, ytr, mu, cfg);
      for (std::size_t a = 0; a < tr.size(); ++a) {
        F[a] += cfg.learning_rate * tree_leaf_value(tree, &ztr[a * d]);
      }
      for (std::size_t b = 0; b < te.size(); ++b) {
        Fte[b] += cfg.learning_rate * tree_leaf_value(tree, &z[te[b] * d]);
      }
      if (t + 1 == cfg.candidate_trees[gi]) {
        double dev = 0.0;
        for (std::size_t b = 0; b < te.size(); ++b) {
          const double m = std::exp(Fte[b]);
          const double yb = y[te[b]];
          dev += w[te[b]] * ((yb > 0.0 ? yb * std::log(yb / m) : 0.0) - (yb - m));
        }
        cv_dev[gi] += 2.0 * dev;
        ++gi;
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < cv_dev.size(); ++g) {
    if (cv_dev[g] < cv_dev[best]) best = g;
  }
  BoostedPoissonModel model =
      fit_fixed(z, n, d, y, w, cfg.candidate_trees[best], cfg, sorted_idx);
  model.cv_selected_trees = cfg.candidate_trees[best];
  return model;
}

}  // namespace ratecate
