#include "ratecate/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ratecate {

void OutcomeModel::predict(const std::vector<double>& z, std::size_t n, std::size_t d,
                           std::vector<double>& out) const {
  if (std::holds_alternative<PoissonGlmModel>(model)) {
    const auto X = DesignMatrix::from_covariates(z, n, d);
    std::get<PoissonGlmModel>(model).predict(X, out);
  } else {
    std::get<BoostedPoissonModel>(model).predict(z, n, d, out);
  }
}

NuisanceBundle NuisanceBundle::from_predictions(std::vector<double> mu0,
                                                std::vector<double> mu1,
                                                std::vector<double> pi1) {
  NuisanceBundle b;
  b.mu0_cf = std::move(mu0);
  b.mu1_cf = std::move(mu1);
  b.pi1_cf = std::move(pi1);
  return b;
}

namespace {

std::vector<double> gather_rows(const std::vector<double>& z, std::size_t d,
                                const std::vector<std::size_t>& rows) {
  std::vector<double> out(rows.size() * d);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    std::copy_n(&z[rows[a] * d], d, &out[a * d]);
  }
  return out;
}

OutcomeModel fit_outcome(const ObservationalDataset& ds,
                         const std::vector<std::size_t>& rows, const NuisanceConfig& cfg) {
  std::vector<double> zr = gather_rows(ds.z, ds.d, rows);
  std::vector<double> yr(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) yr[a] = ds.y[rows[a]];
  OutcomeModel m;
  if (cfg.learner == OutcomeLearner::glm) {
    const auto X = DesignMatrix::from_covariates(zr, rows.size(), ds.d);
    m.model = fit_poisson_glm(X, yr, {}, cfg.glm);
  } else {
    m.model = fit_boosted_poisson(zr, rows.size(), ds.d, yr, {}, cfg.boost);
  }
  return m;
}

}  // namespace

NuisanceBundle fit_nuisance_bundle(const ObservationalDataset& ds, const FoldPlan& plan,
                                   const NuisanceConfig& cfg) {
  if (plan.assignment.size() != ds.n) {
    throw std::invalid_argument("fit_nuisance_bundle: fold plan does not match dataset");
  }
  NuisanceBundle bundle;
  bundle.fold_plan = plan;
  bundle.config = cfg;
  bundle.per_fold.resize(plan.k);
  bundle.mu0_cf.assign(ds.n, 0.0);
  bundle.mu1_cf.assign(ds.n, 0.0);
  bundle.pi1_cf.assign(ds.n, 0.0);

  for (std::size_t k = 0; k < plan.k; ++k) {
    std::vector<std::size_t> train, test, train0, train1;
    for (std::size_t i = 0; i < ds.n; ++i) {
      if (plan.assignment[i] == k) {
        test.push_back(i);
      } else {
        train.push_back(i);
        (ds.r[i] == 1 ? train1 : train0).push_back(i);
      }
    }
    if (train0.empty() || train1.empty()) {
      throw std::invalid_argument("fit_nuisance_bundle: fold " + std::to_string(k + 1) +
                                  " complement lacks one treatment arm");
    }
    auto& fm = bundle.per_fold[k];
    fm.mu0 = fit_outcome(ds, train0, cfg);
    fm.mu1 = fit_outcome(ds, train1, cfg);

    const auto Xtr = DesignMatrix::from_covariates(gather_rows(ds.z, ds.d, train),
                                                   train.size(), ds.d);
    std::vector<double> rtr(train.size());
    for (std::size_t a = 0; a < train.size(); ++a) rtr[a] = ds.r[train[a]];
    fm.pi1 = fit_logistic(Xtr, rtr, cfg.glm);
    fm.pi1.clip_eps = cfg.clip_eps;

    const auto zte = gather_rows(ds.z, ds.d, test);
    std::vector<double> pred;
    fm.mu0.predict(zte, test.size(), ds.d, pred);
    for (std::size_t a = 0; a < test.size(); ++a) {
      bundle.mu0_cf[test[a]] = std::clamp(pred[a], cfg.clip_mu, 1.0 / cfg.clip_mu);
    }
    fm.mu1.predict(zte, test.size(), ds.d, pred);
    for (std::size_t a = 0; a < test.size(); ++a) {
      bundle.mu1_cf[test[a]] = std::clamp(pred[a], cfg.clip_mu, 1.0 / cfg.clip_mu);
    }
    const auto Xte = DesignMatrix::from_covariates(zte, test.size(), ds.d);
    fm.pi1.predict(Xte, pred);
    for (std::size_t a = 0; a < test.size(); ++a) bundle.pi1_cf[test[a]] = pred[a];
  }
  return bundle;
}

}  // namespace ratecate
