#include "ratecate/validate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ratecate/glm.hpp"

namespace ratecate {

double quantile_threshold(const std::vector<double>& scores, double q) {
  if (scores.empty()) throw std::invalid_argument("quantile_threshold: empty scores");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("quantile_threshold: q outside (0,1]");
  if (q == 1.0) return kWholePopulationThreshold;
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double nq = static_cast<double>(sorted.size()) * (1.0 - q);
  // rank of the smallest retained order statistic; the epsilon guards the
  // floor against n*(1-q) landing a hair under an integer
  std::size_t k = static_cast<std::size_t>(std::floor(nq + 1e-9));
  if (k >= sorted.size()) k = sorted.size() - 1;
  return sorted[k];
}

namespace {

struct SubgroupFit {
  std::vector<std::size_t> rows;
  std::vector<double> pi1;   // clipped subgroup propensity per subgroup row
  std::vector<double> mu0;   // subgroup outcome means per subgroup row
  std::vector<double> mu1;
};

SubgroupFit fit_subgroup_models(const ObservationalDataset& ds,
                                const std::vector<std::size_t>& rows, const AdConfig& cfg) {
  SubgroupFit out;
  out.rows = rows;
  std::vector<double> zsub(rows.size() * ds.d);
  std::vector<double> rsub(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    std::copy_n(&ds.z[rows[a] * ds.d], ds.d, &zsub[a * ds.d]);
    rsub[a] = ds.r[rows[a]];
  }
  const auto X = DesignMatrix::from_covariates(zsub, rows.size(), ds.d);
  auto prop = fit_logistic(X, rsub, cfg.glm);
  prop.clip_eps = cfg.clip_eps;
  prop.predict(X, out.pi1);

  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> armrows;
    for (std::size_t a = 0; a < rows.size(); ++a) {
      if (ds.r[rows[a]] == arm) armrows.push_back(a);
    }
    std::vector<double> za(armrows.size() * ds.d), ya(armrows.size());
    for (std::size_t b = 0; b < armrows.size(); ++b) {
      std::copy_n(&zsub[armrows[b] * ds.d], ds.d, &za[b * ds.d]);
      ya[b] = ds.y[rows[armrows[b]]];
    }
    std::vector<double> pred;
    if (cfg.learner == OutcomeLearner::glm) {
      const auto Xa = DesignMatrix::from_covariates(za, armrows.size(), ds.d);
      const auto m = fit_poisson_glm(Xa, ya, {}, cfg.glm);
      m.predict(X, pred);
    } else {
      const auto m = fit_boosted_poisson(za, armrows.size(), ds.d, ya, {}, cfg.boost);
      m.predict(zsub, rows.size(), ds.d, pred);
    }
    (arm == 1 ? out.mu1 : out.mu0) = std::move(pred);
  }
  return out;
}

}  // namespace

SubgroupAdEstimate estimate_ad(const ObservationalDataset& ds,
                               const std::vector<double>& scores, double c,
                               const AdConfig& cfg) {
  if (scores.size() != ds.n) throw std::invalid_argument("estimate_ad: score length mismatch");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (scores[i] >= c) rows.push_back(i);
  }
  if (rows.size() < cfg.min_subgroup_size) {
    throw std::invalid_argument("estimate_ad: subgroup of size " + std::to_string(rows.size()) +
                                " below minimum " + std::to_string(cfg.min_subgroup_size));
  }
  std::size_t n1 = 0;
  for (const std::size_t i : rows) n1 += ds.r[i];
  const std::size_t n0 = rows.size() - n1;
  if (n1 < cfg.min_per_arm || n0 < cfg.min_per_arm) {
    throw std::invalid_argument("estimate_ad: subgroup has " + std::to_string(n1) +
                                " treated / " + std::to_string(n0) + " control, below per-arm "
                                "minimum " + std::to_string(cfg.min_per_arm));
  }

  const auto sub = fit_subgroup_models(ds, rows, cfg);
  const double m_c = static_cast<double>(rows.size());
  double mu1_sum = 0.0, mu0_sum = 0.0;
  for (std::size_t a = 0; a < rows.size(); ++a) {
    const std::size_t i = rows[a];
    const double w1 = ds.r[i] == 1 ? 1.0 / sub.pi1[a] : 0.0;
    const double w0 = ds.r[i] == 0 ? 1.0 / (1.0 - sub.pi1[a]) : 0.0;
    mu1_sum += sub.mu1[a] + w1 * (ds.y[i] - sub.mu1[a]);
    mu0_sum += sub.mu0[a] + w0 * (ds.y[i] - sub.mu0[a]);
  }
  SubgroupAdEstimate est;
  est.c = c;
  est.m_c = rows.size();
  est.mu1_hat = mu1_sum / m_c;
  est.mu0_hat = mu0_sum / m_c;
  if (!(est.mu0_hat > 0.0)) {
    throw std::runtime_error("estimate_ad: nonpositive control subgroup mean (" +
                             std::to_string(est.mu0_hat) + "); refusing to truncate");
  }
  est.ad = est.mu1_hat / est.mu0_hat;
  return est;
}

ValidationCurve validation_curve(const ObservationalDataset& ds,
                                 const std::vector<double>& scores,
                                 const std::vector<double>& q_grid, const AdConfig& cfg) {
  if (!std::is_sorted(q_grid.begin(), q_grid.end())) {
    throw std::invalid_argument("validation_curve: q grid must be sorted ascending");
  }
  ValidationCurve curve;
  for (const double q : q_grid) {
    CurvePoint pt;
    pt.q = q;
    pt.threshold = quantile_threshold(scores, q);
    try {
      pt.estimate = estimate_ad(ds, scores, pt.threshold, cfg);
    } catch (const std::invalid_argument&) {
      pt.estimate.reset();  // too small / one-armed subgroup: absent, not fabricated
    }
    curve.grid.push_back(std::move(pt));
  }
  return curve;
}

std::vector<double> default_q_grid() {
  std::vector<double> q;
  for (int i = 1; i <= 10; ++i) q.push_back(i / 10.0);
  return q;
}

Theorem2Report check_theorem2(const DiscreteDgp& dgp, const std::vector<double>& c_grid,
                              double tol) {
  if (dgp.prob.size() != dgp.mu0.size() || dgp.prob.size() != dgp.mu1.size()) {
    throw std::invalid_argument("check_theorem2: size mismatch");
  }
  const std::size_t m = dgp.prob.size();
  std::vector<double> D(m);
  double dmax = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    D[j] = dgp.mu1[j] / dgp.mu0[j];
    dmax = std::max(dmax, D[j]);
  }
  Theorem2Report rep;
  rep.monotone = true;
  rep.ad_ge_c = true;
  double prev = -std::numeric_limits<double>::infinity();
  for (const double c : c_grid) {
    if (c > dmax) continue;  // empty subgroup
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (D[j] >= c) {
        num += dgp.prob[j] * dgp.mu1[j];
        den += dgp.prob[j] * dgp.mu0[j];
      }
    }
    const double ad = num / den;
    rep.c_grid.push_back(c);
    rep.ad.push_back(ad);
    if (ad < prev - tol) {
      rep.monotone = false;
      rep.max_violation = std::max(rep.max_violation, prev - ad);
    }
    if (ad < c - tol) {
      rep.ad_ge_c = false;
      rep.max_violation = std::max(rep.max_violation, c - ad);
    }
    prev = ad;
  }
  return rep;
}

OrExampleReport or_counterexample(std::size_t n_patients, std::size_t subgroup) {
  const double n = static_cast<double>(n_patients);
  std::vector<double> p(n_patients), q(n_patients), logtheta(n_patients);
  for (std::size_t idx = 0; idx < n_patients; ++idx) {
    const double i = static_cast<double>(idx + 1);
    p[idx] = (idx + 1) % 2 == 0 ? 1.0 - i / (n + 1.0) : i / (n + 1.0);
    logtheta[idx] = std::log(2.0) - std::log(4.0) * (i - 1.0) / (n - 1.0);
    const double th = std::exp(logtheta[idx]);
    q[idx] = p[idx] * th / (1.0 - p[idx] + p[idx] * th);
  }
  auto marginal_or = [](double psum, double qsum, double k) {
    const double pb = psum / k, qb = qsum / k;
    return (qb / (1.0 - qb)) / (pb / (1.0 - pb));
  };

  // Conditional OR is decreasing in the patient index, so the top-k group is
  // the first k patients.
  double ps = 0.0, qs = 0.0;
  for (std::size_t idx = 0; idx < subgroup; ++idx) {
    ps += p[idx];
    qs += q[idx];
  }
  OrExampleReport rep;
  rep.top_by_conditional = marginal_or(ps, qs, static_cast<double>(subgroup));

  // The marginal OR depends on a subset only through (sum p, sum q) and is
  // decreasing in the first, increasing in the second, so the optimum lies on
  // the Pareto frontier; sweep it exactly with dominance pruning.
  struct State {
    double ps, qs;
  };
  std::vector<std::vector<State>> frontier(subgroup + 1);
  frontier[0] = {State{0.0, 0.0}};
  auto prune = [](std::vector<State>& states) {
    std::sort(states.begin(), states.end(), [](const State& a, const State& b) {
      if (a.ps != b.ps) return a.ps < b.ps;
      return a.qs > b.qs;
    });
    std::vector<State> kept;
    double best_q = -1.0;
    for (const auto& s : states) {
      if (s.qs > best_q + 1e-15) {
        kept.push_back(s);
        best_q = s.qs;
      }
    }
    states = std::move(kept);
  };
  for (std::size_t idx = 0; idx < n_patients; ++idx) {
    for (std::size_t k = std::min(subgroup, idx + 1); k >= 1; --k) {
      for (const auto& s : frontier[k - 1]) {
        frontier[k].push_back(State{s.ps + p[idx], s.qs + q[idx]});
      }
      prune(frontier[k]);
    }
  }
  double best = 0.0;
  for (const auto& s : frontier[subgroup]) {
    best = std::max(best, marginal_or(s.ps, s.qs, static_cast<double>(subgroup)));
  }
  rep.best_subgroup = best;
  return rep;
}

}  // namespace ratecate
