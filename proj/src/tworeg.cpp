#include "ratecate/tworeg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ratecate/kernels.hpp"

namespace ratecate {

std::vector<double> TwoRegressionFit::delta_implied() const {
  std::vector<double> d(beta1.size());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = beta1[j] - beta0[j];
  return d;
}

CalibrationResult calibrate(const ObservationalDataset& ds, const NuisanceBundle& bundle,
                            int arm, const std::vector<double>& extra_weight,
                            const GlmConfig& cfg) {
  if (arm != 0 && arm != 1) throw std::invalid_argument("calibrate: arm must be 0 or 1");
  if (bundle.pi1_cf.size() != ds.n) {
    throw std::invalid_argument("calibrate: bundle does not match dataset");
  }
  const auto& mu_cf = arm == 1 ? bundle.mu1_cf : bundle.mu0_cf;

  // Augmented design [log mu_hat | 1 | z]; the log column leads so that an
  // exactly log-linear initial learner drops a ztilde direction, not alpha.
  DesignMatrix Xa;
  Xa.n = ds.n;
  Xa.p = ds.d + 2;
  Xa.cols.assign(Xa.p, std::vector<double>(ds.n));
  for (std::size_t i = 0; i < ds.n; ++i) Xa.cols[0][i] = std::log(mu_cf[i]);
  std::fill(Xa.cols[1].begin(), Xa.cols[1].end(), 1.0);
  for (std::size_t j = 0; j < ds.d; ++j) {
    for (std::size_t i = 0; i < ds.n; ++i) Xa.cols[j + 2][i] = ds.zat(i, j);
  }

  std::vector<double> w(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double p_arm = arm == 1 ? bundle.pi1_cf[i] : 1.0 - bundle.pi1_cf[i];
    w[i] = (ds.r[i] == arm ? 1.0 / p_arm : 0.0);
    if (!extra_weight.empty()) w[i] *= extra_weight[i];
  }

  const PoissonGlmModel m = fit_poisson_glm(Xa, ds.y, w, cfg);

  CalibrationResult res;
  res.cal.alpha = m.coefficients[0];
  res.cal.gamma.assign(m.coefficients.begin() + 1, m.coefficients.end());
  res.cal.report = m.report;
  for (const std::size_t j : m.report.dropped_columns) {
    if (j >= 1) res.cal.dropped_gamma.push_back(j - 1);
  }
  std::vector<double> eta;
  Xa.linear_predictor(m.coefficients, eta);
  res.mu_tilde.resize(ds.n);
  kern::vexp(eta.data(), res.mu_tilde.data(), ds.n);
  return res;
}

std::vector<double> project(const DesignMatrix& X, const std::vector<double>& mu_tilde,
                            const GlmConfig& cfg) {
  for (const double v : mu_tilde) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("project: calibrated means must be positive and finite");
    }
  }
  const PoissonGlmModel m = fit_poisson_glm(X, mu_tilde, {}, cfg);
  if (!m.report.converged) {
    throw std::runtime_error("project: Poisson projection did not converge (score norm " +
                             std::to_string(m.report.score_norm) + ")");
  }
  return m.coefficients;
}

TwoRegressionFit fit_two_regression(const ObservationalDataset& ds,
                                    const NuisanceBundle& bundle, const GlmConfig& cfg) {
  const auto X = DesignMatrix::from_dataset(ds);
  TwoRegressionFit fit;
  fit.calibration.source =
      bundle.config.learner == OutcomeLearner::boosted ? "boosted" : "glm";
  auto c0 = calibrate(ds, bundle, 0, {}, cfg);
  auto c1 = calibrate(ds, bundle, 1, {}, cfg);
  fit.beta0 = project(X, c0.mu_tilde, cfg);
  fit.beta1 = project(X, c1.mu_tilde, cfg);
  fit.calibration.arm0 = std::move(c0.cal);
  fit.calibration.arm1 = std::move(c1.cal);
  return fit;
}

TwoRegressionFit fit_naive(const ObservationalDataset& ds, const GlmConfig& cfg) {
  std::vector<std::size_t> rows0, rows1;
  for (std::size_t i = 0; i < ds.n; ++i) (ds.r[i] == 1 ? rows1 : rows0).push_back(i);
  if (rows0.empty() || rows1.empty()) {
    throw std::invalid_argument("fit_naive: both arms must be nonempty");
  }
  const auto X = DesignMatrix::from_dataset(ds);
  TwoRegressionFit fit;
  fit.calibration.source = "naive";
  for (int arm = 0; arm < 2; ++arm) {
    const auto& rows = arm == 1 ? rows1 : rows0;
    auto Xa = X.subset(rows);
    std::vector<double> ya(rows.size());
    for (std::size_t a = 0; a < rows.size(); ++a) ya[a] = ds.y[rows[a]];
    const auto m = fit_poisson_glm(Xa, ya, {}, cfg);
    (arm == 1 ? fit.beta1 : fit.beta0) = m.coefficients;
  }
  return fit;
}

}  // namespace ratecate
