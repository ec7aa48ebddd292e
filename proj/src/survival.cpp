#include "ratecate/survival.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ratecate/kernels.hpp"
#include "ratecate/tworeg.hpp"
#include "ratecate/util.hpp"

namespace ratecate {

double KaplanMeier::eval(double t) const {
  // right-continuous: the drop at a censoring time counts at that time
  auto it = std::upper_bound(times.begin(), times.end(), t);
  double v = it == times.begin() ? 1.0 : surv[(it - times.begin()) - 1];
  if (v < floor_eps) {
    ++floored_evals;
    v = floor_eps;
  }
  return v;
}

KaplanMeier fit_km(const std::vector<double>& times, const std::vector<int>& events,
                   double floor_eps) {
  if (times.empty()) throw std::invalid_argument("fit_km: no observations");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  KaplanMeier km;
  km.floor_eps = floor_eps;
  double s = 1.0;
  std::size_t at_risk = times.size();
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = times[order[i]];
    std::size_t d = 0, tied = 0;
    while (i < order.size() && times[order[i]] == t) {
      d += events[order[i]] == 1 ? 1u : 0u;
      ++tied;
      ++i;
    }
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      km.times.push_back(t);
      km.surv.push_back(s);
    }
    at_risk -= tied;
  }
  return km;
}

KaplanMeier fit_censoring_km_arm(const ObservationalDataset& ds, int arm, double floor_eps) {
  if (!ds.survival) throw std::invalid_argument("fit_censoring_km: no survival fields");
  std::vector<double> t;
  std::vector<int> e;
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (ds.r[i] != arm) continue;
    t.push_back(ds.survival->time[i]);
    e.push_back(1 - ds.survival->status[i]);  // censoring is the event
  }
  if (t.empty()) throw std::invalid_argument("fit_censoring_km: empty arm");
  return fit_km(t, e, floor_eps);
}

CensoringModel fit_censoring_km(const ObservationalDataset& ds, double floor_eps) {
  CensoringModel cm;
  cm.arm0 = fit_censoring_km_arm(ds, 0, floor_eps);
  cm.arm1 = fit_censoring_km_arm(ds, 1, floor_eps);
  return cm;
}

double ipcw_weight(double x, int status, const KaplanMeier& censoring, double tau) {
  const bool observed = status == 1 || x >= tau;
  if (!observed) return 0.0;
  const double t_tau = std::min(x, tau);
  return 1.0 / censoring.eval(t_tau);
}

void RmstModel::predict_rmtl(const DesignMatrix& B, double tau,
                             std::vector<double>& out) const {
  std::vector<double> g;
  B.linear_predictor(eta, g);
  out.resize(B.n);
  kern::vexp(g.data(), out.data(), B.n);
  for (double& v : out) v = tau / (1.0 + v);
}

RmstModel fit_rmst_regression(const DesignMatrix& B, const std::vector<double>& t_tau,
                              const std::vector<double>& ipcw,
                              const std::vector<char>& in_arm, double tau, double eta_cap,
                              const GlmConfig& cfg) {
  const std::size_t n = B.n;
  const std::size_t p = B.p;
  double wmass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (in_arm[i]) wmass += ipcw[i];
  }
  if (!(wmass > 0.0)) {
    throw std::invalid_argument("fit_rmst_regression: no uncensored-by-tau mass in arm");
  }
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(p);
  RmstModel model;
  std::vector<double> g(n), ex(n);
  for (model.report.iterations = 0; model.report.iterations < cfg.max_iter;
       ++model.report.iterations) {
    std::vector<double> etav(eta.data(), eta.data() + p);
    B.linear_predictor(etav, g);
    kern::vexp(g.data(), ex.data(), n);
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
    std::vector<double> resid(n, 0.0), hw(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_arm[i] || ipcw[i] == 0.0) continue;
      const double mean = tau * ex[i] / (1.0 + ex[i]);
      const double dmean = tau * ex[i] / ((1.0 + ex[i]) * (1.0 + ex[i]));
      resid[i] = ipcw[i] * (t_tau[i] - mean);
      hw[i] = ipcw[i] * dmean;
    }
    for (std::size_t a = 0; a < p; ++a) {
      score(a) = kern::dot(resid.data(), B.col(a), n);
      for (std::size_t b = 0; b <= a; ++b) {
        H(a, b) = H(b, a) = kern::wdot(hw.data(), B.col(a), B.col(b), n);
      }
    }
    model.report.score_norm = score.lpNorm<Eigen::Infinity>();
    if (model.report.score_norm <= cfg.tol) {
      model.report.converged = true;
      break;
    }
    H.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = H.ldlt().solve(score);
    eta += step;
    bool capped = false;
    for (std::size_t a = 0; a < p; ++a) {
      if (std::abs(eta(a)) > eta_cap) {
        eta(a) = eta(a) > 0 ? eta_cap : -eta_cap;
        capped = true;
      }
    }
    if (capped) {
      model.capped = true;
      // boundary likelihood; a capped fit is the documented outcome
      if (step.lpNorm<Eigen::Infinity>() < 1e-6) break;
    }
  }
  model.eta.assign(eta.data(), eta.data() + p);
  return model;
}

namespace {

std::vector<double> rmtl_outcome(const ObservationalDataset& ds, double tau) {
  std::vector<double> y(ds.n, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double x = ds.survival->time[i];
    const bool observed = ds.survival->status[i] == 1 || x >= tau;
    y[i] = observed ? tau - std::min(x, tau) : 0.0;
  }
  return y;
}

void check_survival(const ObservationalDataset& ds, double tau) {
  if (!ds.survival) throw std::invalid_argument("survival fields required");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  double tmax = 0.0;
  for (const double t : ds.survival->time) tmax = std::max(tmax, t);
  if (tau > tmax) throw std::invalid_argument("tau exceeds the largest observed time");
}

}  // namespace

RmtlWorkspace fit_rmtl_nuisances(const ObservationalDataset& ds, const FoldPlan& plan,
                                 const RmtlConfig& cfg) {
  check_survival(ds, cfg.tau);
  const double tau = cfg.tau;
  RmtlWorkspace work;
  work.y_rmtl = rmtl_outcome(ds, tau);
  work.ipcw.assign(ds.n, 0.0);
  work.mu0_cf.assign(ds.n, 0.0);
  work.mu1_cf.assign(ds.n, 0.0);
  work.pi1_cf.assign(ds.n, 0.0);

  for (std::size_t k = 0; k < plan.k; ++k) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < ds.n; ++i) {
      (plan.assignment[i] == k ? test : train).push_back(i);
    }
    // censoring KM per arm on the fold complement
    KaplanMeier km[2];
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<double> t;
      std::vector<int> e;
      for (const std::size_t i : train) {
        if (ds.r[i] != arm) continue;
        t.push_back(ds.survival->time[i]);
        e.push_back(1 - ds.survival->status[i]);
      }
      if (t.empty()) {
        throw std::invalid_argument("fit_rmtl_nuisances: fold complement lacks arm " +
                                    std::to_string(arm));
      }
      km[arm] = fit_km(t, e, cfg.floor_eps);
    }

    // per-arm RMST working model on the complement, IPCW-weighted
    std::vector<double> ztr(train.size() * ds.d), rtr(train.size()), ttr(train.size()),
        ltr(train.size());
    for (std::size_t a = 0; a < train.size(); ++a) {
      const std::size_t i = train[a];
      std::copy_n(&ds.z[i * ds.d], ds.d, &ztr[a * ds.d]);
      rtr[a] = ds.r[i];
      ttr[a] = std::min(ds.survival->time[i], tau);
      ltr[a] = ipcw_weight(ds.survival->time[i], ds.survival->status[i], km[ds.r[i]], tau);
    }
    const auto Btr = DesignMatrix::from_covariates(ztr, train.size(), ds.d);
    RmstModel rmst[2];
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<char> in_arm(train.size());
      for (std::size_t a = 0; a < train.size(); ++a) in_arm[a] = rtr[a] == arm;
      rmst[arm] = fit_rmst_regression(Btr, ttr, ltr, in_arm, tau, cfg.eta_cap, cfg.glm);
    }
    auto prop = fit_logistic(Btr, rtr, cfg.glm);

    // cross-fitted predictions and weights for fold-k rows
    std::vector<double> zte(test.size() * ds.d);
    for (std::size_t a = 0; a < test.size(); ++a) {
      std::copy_n(&ds.z[test[a] * ds.d], ds.d, &zte[a * ds.d]);
    }
    const auto Bte = DesignMatrix::from_covariates(zte, test.size(), ds.d);
    std::vector<double> m0, m1, pp;
    rmst[0].predict_rmtl(Bte, tau, m0);
    rmst[1].predict_rmtl(Bte, tau, m1);
    prop.predict(Bte, pp);
    for (std::size_t a = 0; a < test.size(); ++a) {
      const std::size_t i = test[a];
      work.mu0_cf[i] = std::clamp(m0[a], 1e-3 * tau, tau);
      work.mu1_cf[i] = std::clamp(m1[a], 1e-3 * tau, tau);
      work.pi1_cf[i] = pp[a];
      work.ipcw[i] =
          ipcw_weight(ds.survival->time[i], ds.survival->status[i], km[ds.r[i]], tau);
    }
  }
  return work;
}

ContrastFit solve_rmtl_contrast(const ObservationalDataset& ds, const RmtlWorkspace& work,
                                const RmtlConfig& cfg) {
  const auto X = DesignMatrix::from_dataset(ds);
  std::vector<double> r01(ds.r.begin(), ds.r.end());
  ContrastData data;
  data.X = &X;
  data.y = &work.y_rmtl;
  data.r01 = &r01;
  data.mu0 = &work.mu0_cf;
  data.mu1 = &work.mu1_cf;
  data.pi1 = &work.pi1_cf;
  data.row_weight = &work.ipcw;
  ContrastFit fit = solve_contrast_core(data, cfg.symmetric, cfg.solver);
  fit.covariance = sandwich_covariance(data, fit.delta);
  return fit;
}

ContrastFit fit_rmtl_contrast(const ObservationalDataset& ds, const RmtlConfig& cfg) {
  ContrastFit first;
  std::vector<double> delta_sum;
  const int reps = std::max(cfg.replicates, 1);
  for (int rep = 0; rep < reps; ++rep) {
    const auto plan =
        make_folds(ds.n, cfg.folds, ds.r, derive_seed(cfg.seed, Stream::replicate, rep));
    const auto work = fit_rmtl_nuisances(ds, plan, cfg);
    ContrastFit fit = solve_rmtl_contrast(ds, work, cfg);
    if (!fit.solver_report.converged) {
      throw std::runtime_error("rmtl contrast solver failed on replicate " +
                               std::to_string(rep + 1) + ": " + fit.solver_report.note);
    }
    if (rep == 0) {
      first = fit;
      delta_sum = fit.delta;
    } else {
      for (std::size_t j = 0; j < delta_sum.size(); ++j) delta_sum[j] += fit.delta[j];
    }
  }
  for (double& v : delta_sum) v /= reps;
  first.delta = delta_sum;
  first.partition_replicates = reps;
  return first;
}

RmtlTwoRegressionFit fit_rmtl_two_regression(const ObservationalDataset& ds,
                                             const RmtlWorkspace& work,
                                             const RmtlConfig& cfg) {
  // Reuse the count-outcome calibration machinery on the RMTL outcome with
  // the combined L_i * W_i(r) weights.
  ObservationalDataset flat = ds;
  flat.y = work.y_rmtl;
  flat.survival.reset();
  flat.mode = OutcomeMode::count;
  NuisanceBundle bundle =
      NuisanceBundle::from_predictions(work.mu0_cf, work.mu1_cf, work.pi1_cf);
  const auto X = DesignMatrix::from_dataset(ds);
  RmtlTwoRegressionFit fit;
  for (int arm = 0; arm < 2; ++arm) {
    const auto cal = calibrate(flat, bundle, arm, work.ipcw, cfg.glm);
    auto beta = project(X, cal.mu_tilde, cfg.glm);
    (arm == 1 ? fit.beta1 : fit.beta0) = std::move(beta);
  }
  return fit;
}

RmtlTwoRegressionFit fit_rmtl_naive(const ObservationalDataset& ds, double tau,
                                    double floor_eps, const GlmConfig& cfg) {
  check_survival(ds, tau);
  const auto y = rmtl_outcome(ds, tau);
  const auto cm = fit_censoring_km(ds, floor_eps);
  const auto X = DesignMatrix::from_dataset(ds);
  RmtlTwoRegressionFit fit;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.n; ++i) {
      if (ds.r[i] == arm) rows.push_back(i);
    }
    auto Xa = X.subset(rows);
    std::vector<double> ya(rows.size()), wa(rows.size());
    for (std::size_t a = 0; a < rows.size(); ++a) {
      const std::size_t i = rows[a];
      ya[a] = y[i];
      wa[a] = ipcw_weight(ds.survival->time[i], ds.survival->status[i], cm.for_arm(arm), tau);
    }
    const auto m = fit_poisson_glm(Xa, ya, wa, cfg);
    (arm == 1 ? fit.beta1 : fit.beta0) = m.coefficients;
  }
  return fit;
}

ValidationCurve rmtl_validation_curve(const ObservationalDataset& ds,
                                      const std::vector<double>& scores, double tau,
                                      const std::vector<double>& q_grid, const AdConfig& cfg,
                                      double floor_eps) {
  check_survival(ds, tau);
  if (scores.size() != ds.n) {
    throw std::invalid_argument("rmtl_validation_curve: score length mismatch");
  }
  const auto y = rmtl_outcome(ds, tau);
  ValidationCurve curve;
  curve.score_name = "rmtl_ratio";
  for (const double q : q_grid) {
    CurvePoint pt;
    pt.q = q;
    pt.threshold = quantile_threshold(scores, q);
    try {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < ds.n; ++i) {
        if (scores[i] >= pt.threshold) rows.push_back(i);
      }
      if (rows.size() < cfg.min_subgroup_size) {
        throw std::invalid_argument("subgroup too small");
      }
      std::size_t n1 = 0;
      for (const std::size_t i : rows) n1 += ds.r[i];
      if (n1 < cfg.min_per_arm || rows.size() - n1 < cfg.min_per_arm) {
        throw std::invalid_argument("one-sided subgroup");
      }

      // subgroup nuisances: propensity, per-arm censoring KM + RMST model
      std::vector<double> zs(rows.size() * ds.d), rs(rows.size()), ts(rows.size());
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const std::size_t i = rows[a];
        std::copy_n(&ds.z[i * ds.d], ds.d, &zs[a * ds.d]);
        rs[a] = ds.r[i];
        ts[a] = std::min(ds.survival->time[i], tau);
      }
      const auto Xs = DesignMatrix::from_covariates(zs, rows.size(), ds.d);
      auto prop = fit_logistic(Xs, rs, cfg.glm);
      prop.clip_eps = cfg.clip_eps;
      std::vector<double> pi1;
      prop.predict(Xs, pi1);

      KaplanMeier km[2];
      std::vector<double> lw(rows.size(), 0.0);
      for (int arm = 0; arm < 2; ++arm) {
        std::vector<double> t;
        std::vector<int> e;
        for (const std::size_t i : rows) {
          if (ds.r[i] != arm) continue;
          t.push_back(ds.survival->time[i]);
          e.push_back(1 - ds.survival->status[i]);
        }
        km[arm] = fit_km(t, e, floor_eps);
      }
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const std::size_t i = rows[a];
        lw[a] = ipcw_weight(ds.survival->time[i], ds.survival->status[i], km[ds.r[i]], tau);
      }
      std::vector<double> mu[2];
      for (int arm = 0; arm < 2; ++arm) {
        std::vector<char> in_arm(rows.size());
        for (std::size_t a = 0; a < rows.size(); ++a) in_arm[a] = rs[a] == arm;
        const auto m = fit_rmst_regression(Xs, ts, lw, in_arm, tau, 20.0, cfg.glm);
        m.predict_rmtl(Xs, tau, mu[arm]);
      }

      double mu1_sum = 0.0, mu0_sum = 0.0;
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const std::size_t i = rows[a];
        const double w1 = ds.r[i] == 1 ? lw[a] / pi1[a] : 0.0;
        const double w0 = ds.r[i] == 0 ? lw[a] / (1.0 - pi1[a]) : 0.0;
        mu1_sum += mu[1][a] + w1 * (y[i] - mu[1][a]);
        mu0_sum += mu[0][a] + w0 * (y[i] - mu[0][a]);
      }
      SubgroupAdEstimate est;
      est.c = pt.threshold;
      est.m_c = rows.size();
      est.mu1_hat = mu1_sum / static_cast<double>(rows.size());
      est.mu0_hat = mu0_sum / static_cast<double>(rows.size());
      if (!(est.mu0_hat > 0.0)) {
        throw std::runtime_error("rmtl_validation_curve: nonpositive control subgroup mean");
      }
      est.ad = est.mu1_hat / est.mu0_hat;
      pt.estimate = est;
    } catch (const std::invalid_argument&) {
      pt.estimate.reset();
    }
    curve.grid.push_back(std::move(pt));
  }
  return curve;
}

double cox_scalar_fit(const std::vector<double>& z, const std::vector<double>& times) {
  if (z.size() != times.size() || z.empty()) {
    throw std::invalid_argument("cox_scalar_fit: size mismatch");
  }
  const std::size_t n = z.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // descending time: running sums accumulate the risk set
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });
  std::vector<double> zs(n);
  for (std::size_t i = 0; i < n; ++i) zs[i] = z[order[i]];

  double beta = 0.0;
  for (int it = 0; it < 100; ++it) {
    double U = 0.0, I = 0.0;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::exp(beta * zs[i]);
      s0 += w;
      s1 += w * zs[i];
      s2 += w * zs[i] * zs[i];
      const double m = s1 / s0;
      U += zs[i] - m;
      I += s2 / s0 - m * m;
    }
    const double step = U / I;
    beta += step;
    if (std::abs(step) < 1e-12) break;
  }
  return beta;
}

SpuriousHrReport check_spurious_hr(std::size_t n, std::uint64_t seed) {
  // Piecewise-constant hazard z^-1 / z^-2 / z^-3 on [0,1), [1,2), [2,inf);
  // arm 1 halves the hazard. The displayed source carries a leading factor 2
  // whose removal is what reproduces the stated per-arm Cox limits.
  auto rng = make_rng(seed, Stream::dgp);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  std::exponential_distribution<double> expo(1.0);
  SpuriousHrReport rep;
  for (int arm = 0; arm < 2; ++arm) {
    const double mult = arm == 1 ? 0.5 : 1.0;
    std::vector<double> z(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      double zi = unif(rng);
      while (zi == 0.0) zi = unif(rng);
      z[i] = zi;
      const double a = mult / zi;
      const double b = mult / (zi * zi);
      const double c = mult / (zi * zi * zi);
      const double e = expo(rng);
      if (e < a) {
        t[i] = e / a;
      } else if (e < a + b) {
        t[i] = 1.0 + (e - a) / b;
      } else {
        t[i] = 2.0 + (e - a - b) / c;
      }
    }
    (arm == 1 ? rep.beta1 : rep.beta0) = cox_scalar_fit(z, t);
  }
  return rep;
}

}  // namespace ratecate
