#include "ratecate/sim.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "ratecate/boosting.hpp"
#include "ratecate/survival.hpp"
#include "ratecate/util.hpp"

namespace ratecate {

namespace {

// Cholesky factor of the 5x5 equicorrelated block (rho = 0.5), computed once.
const std::vector<double>& correlated_block_chol() {
  static const std::vector<double> L = [] {
    std::vector<double> a(25, 0.0);
    std::vector<double> c(25, 0.5);
    for (int i = 0; i < 5; ++i) c[i * 5 + i] = 1.0;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = c[i * 5 + j];
        for (int k = 0; k < j; ++k) s -= a[i * 5 + k] * a[j * 5 + k];
        a[i * 5 + j] = i == j ? std::sqrt(s) : s / a[j * 5 + j];
      }
    }
    return a;
  }();
  return L;
}

void correlate_and_clip(double* z) {
  const auto& L = correlated_block_chol();
  double g[5];
  for (int i = 0; i < 5; ++i) g[i] = z[5 + i];
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j <= i; ++j) s += L[i * 5 + j] * g[j];
    z[5 + i] = s;
  }
  for (int j = 0; j < 10; ++j) z[j] = std::clamp(z[j], -2.0, 2.0);
}

double rmtl_mean(double lambda, double tau) {
  // E[tau - T^tau] for T ~ Exp(lambda)
  return tau - (1.0 - std::exp(-lambda * tau)) / lambda;
}

}  // namespace

DgpName dgp_from_string(const std::string& name) {
  for (const auto& s : dgp_names()) {
    if (s == name) {
      if (name == "setting1_contrast") return DgpName::setting1_contrast;
      if (name == "setting2_poisson") return DgpName::setting2_poisson;
      if (name == "setting3_mild") return DgpName::setting3_mild;
      if (name == "setting4_large") return DgpName::setting4_large;
      if (name == "surv1") return DgpName::surv1;
      if (name == "surv2") return DgpName::surv2;
      return DgpName::toy_confounding;
    }
  }
  std::string valid;
  for (const auto& s : dgp_names()) valid += (valid.empty() ? "" : ", ") + s;
  throw std::invalid_argument("unknown setting '" + name + "'; valid: " + valid);
}

std::string dgp_to_string(DgpName name) {
  switch (name) {
    case DgpName::setting1_contrast: return "setting1_contrast";
    case DgpName::setting2_poisson: return "setting2_poisson";
    case DgpName::setting3_mild: return "setting3_mild";
    case DgpName::setting4_large: return "setting4_large";
    case DgpName::surv1: return "surv1";
    case DgpName::surv2: return "surv2";
    case DgpName::toy_confounding: return "toy_confounding";
  }
  return "?";
}

std::vector<std::string> dgp_names() {
  return {"setting1_contrast", "setting2_poisson", "setting3_mild", "setting4_large",
          "surv1", "surv2", "toy_confounding"};
}

double DgpSpec::mu1(const double* z) const {
  const double z1 = z[0], z2 = z[1], z6 = z[5];
  switch (name) {
    case DgpName::setting1_contrast:
      return std::exp(0.85 + 0.25 * (z1 + z6) + 1.5 * (std::abs(z1) - std::abs(z6)));
    case DgpName::setting2_poisson:
      return std::exp(0.925 + 0.125 * z1 + 0.30 * z2 + 0.25 * z6);
    case DgpName::setting3_mild:
      return std::exp(0.50 + 0.125 * z1 + 0.30 * std::abs(z2 + 0.5) + 0.25 * z6 +
                      0.5 * (std::abs(z1) + std::abs(z6)));
    case DgpName::setting4_large:
      return std::exp(1.235 - 0.125 * std::abs(z1 + z6 + 1.0) - 0.3 * std::abs(z2 + 0.5) -
                      0.125 * z6 + 0.5 * (std::abs(z1) + std::abs(z6)));
    case DgpName::surv1:
      return std::exp(-0.350 + 0.125 * z1 + 0.3 * z2 + 0.5 * z6 - 0.5 * std::abs(z1) +
                      0.5 * std::abs(z2));
    case DgpName::surv2:
      return std::exp(-0.050 + 0.125 * z1 + 0.3 * z2 + 0.5 * z6);
    case DgpName::toy_confounding:
      return z[0] * z[0];
  }
  return 0.0;
}

double DgpSpec::mu0(const double* z) const {
  const double z1 = z[0], z2 = z[1], z6 = z[5];
  switch (name) {
    case DgpName::setting1_contrast:
      return std::exp(0.95 + 1.5 * (std::abs(z1) - std::abs(z6)));
    case DgpName::setting2_poisson:
      return std::exp(0.550 + 0.25 * z2 + 0.50 * z6);
    case DgpName::setting3_mild:
      return std::exp(-0.25 + 0.25 * std::abs(z2 + 0.5) + 0.50 * z6 +
                      0.5 * (std::abs(z1) + std::abs(z6)));
    case DgpName::setting4_large:
      return std::exp(0.320 + 0.125 * std::abs(z1 + z6 + 1.0) + 0.3 * std::abs(z2 + 0.5) +
                      0.125 * z6 + 0.5 * (std::abs(z1) + std::abs(z6)));
    case DgpName::surv1:
      return std::exp(-0.375 + 0.25 * z2 + 0.25 * z6 - 0.5 * std::abs(z1) +
                      0.5 * std::abs(z2));
    case DgpName::surv2:
      return std::exp(-0.075 + 0.25 * z2 + 0.25 * z6);
    case DgpName::toy_confounding:
      return z[0] * z[0];
  }
  return 0.0;
}

double DgpSpec::pi1(const double* z) const {
  if (name == DgpName::toy_confounding) {
    // Z | R=r ~ N(r - 0.5, 1) with P(R=1)=1/2 implies logistic(z)
    return 1.0 / (1.0 + std::exp(-z[0]));
  }
  if (survival) {
    return 1.0 / (1.0 + std::exp(-z[0] + 0.5 * z[1] + 0.5 * z[5]));
  }
  return 1.0 / (1.0 + std::exp(z[0] + 0.5 * z[1] - 0.5 * z[5]));
}

double DgpSpec::true_log_cate(const double* z, double tau) const {
  if (survival) {
    return std::log(rmtl_mean(mu1(z), tau)) - std::log(rmtl_mean(mu0(z), tau));
  }
  return std::log(mu1(z)) - std::log(mu0(z));
}

DgpSpec DgpSpec::get(DgpName name) {
  DgpSpec s;
  s.name = name;
  s.survival = name == DgpName::surv1 || name == DgpName::surv2;
  s.d = name == DgpName::toy_confounding ? 1 : 10;
  if (name == DgpName::setting1_contrast) {
    s.delta0 = std::vector<double>{-0.1, 0.25, 0, 0, 0, 0, 0.25, 0, 0, 0, 0};
  } else if (name == DgpName::setting2_poisson) {
    s.delta0 = std::vector<double>{0.375, 0.125, 0.05, 0, 0, 0, -0.25, 0, 0, 0, 0};
  } else if (name == DgpName::toy_confounding) {
    s.delta0 = std::vector<double>{0.0, 0.0};
  }
  return s;
}

GeneratedData generate(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
  auto rng = make_rng(seed, Stream::dgp);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);

  GeneratedData out;
  auto& ds = out.ds;
  ds.n = n;
  ds.d = spec.d;
  ds.z.resize(n * spec.d);
  ds.y.resize(n);
  ds.r.resize(n);
  out.true_log_cate.resize(n);

  if (spec.name == DgpName::toy_confounding) {
    for (std::size_t i = 0; i < n; ++i) {
      const int r = unif01(rng) < 0.5 ? 1 : 0;
      const double z = gauss(rng) + (r - 0.5);
      ds.z[i] = z;
      ds.r[i] = r;
      std::poisson_distribution<long> pois(z * z);
      ds.y[i] = z * z > 0.0 ? static_cast<double>(pois(rng)) : 0.0;
      out.true_log_cate[i] = 0.0;
    }
    return out;
  }

  if (spec.survival) {
    ds.survival.emplace();
    ds.survival->time.resize(n);
    ds.survival->status.resize(n);
    ds.mode = OutcomeMode::survival;
  } else {
    ds.exposure.emplace(n, 0.0);
  }

  std::vector<double> zrow(spec.d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < spec.d; ++j) zrow[j] = gauss(rng);
    correlate_and_clip(zrow.data());
    std::copy(zrow.begin(), zrow.end(), &ds.z[i * spec.d]);
    const double p1 = spec.pi1(zrow.data());
    const int r = unif01(rng) < p1 ? 1 : 0;
    ds.r[i] = r;
    const double rate = r == 1 ? spec.mu1(zrow.data()) : spec.mu0(zrow.data());
    if (spec.survival) {
      const double t = -std::log1p(-unif01(rng)) / rate;
      const double cu = 0.5 + 0.5 * unif01(rng);
      const double ce = -std::log1p(-unif01(rng)) / std::exp(0.25 + zrow[2]);
      const double c = std::min(cu, ce);
      ds.survival->time[i] = std::min(t, c);
      ds.survival->status[i] = t < c ? 1 : 0;
      ds.y[i] = 0.0;
    } else {
      const double f = 0.75 * (1.0 - unif01(rng));  // U(0, 0.75]
      (*ds.exposure)[i] = f;
      std::poisson_distribution<long> pois(rate * f);
      ds.y[i] = static_cast<double>(pois(rng));
    }
    out.true_log_cate[i] = spec.true_log_cate(zrow.data());
  }
  return out;
}

OraclePoints make_oracle_points(const DgpSpec& spec, std::size_t m, std::uint64_t seed,
                                double tau) {
  OraclePoints pts;
  pts.m = m;
  pts.d = spec.d;
  pts.z.resize(m * spec.d);
  pts.mu1.resize(m);
  pts.mu0.resize(m);
  QuasiSequence seq(static_cast<int>(spec.d), seed);
  std::vector<double> u(spec.d), zrow(spec.d);
  for (std::size_t i = 0; i < m; ++i) {
    seq.next(u.data());
    for (std::size_t j = 0; j < spec.d; ++j) zrow[j] = inv_normal_cdf(u[j]);
    if (spec.d == 10) correlate_and_clip(zrow.data());
    std::copy(zrow.begin(), zrow.end(), &pts.z[i * spec.d]);
    if (spec.survival) {
      pts.mu1[i] = rmtl_mean(spec.mu1(zrow.data()), tau);
      pts.mu0[i] = rmtl_mean(spec.mu0(zrow.data()), tau);
    } else {
      pts.mu1[i] = spec.mu1(zrow.data());
      pts.mu0[i] = spec.mu0(zrow.data());
    }
  }
  return pts;
}

double population_ad(const OraclePoints& oracle, const std::vector<double>& scores,
                     double q) {
  return population_ad_curve(oracle, scores, {q})[0];
}

std::vector<double> population_ad_curve(const OraclePoints& oracle,
                                        const std::vector<double>& scores,
                                        const std::vector<double>& q_grid) {
  if (scores.size() != oracle.m) {
    throw std::invalid_argument("population_ad_curve: score length mismatch");
  }
  std::vector<std::size_t> order(oracle.m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> cum1(oracle.m + 1, 0.0), cum0(oracle.m + 1, 0.0);
  for (std::size_t i = 0; i < oracle.m; ++i) {
    cum1[i + 1] = cum1[i] + oracle.mu1[order[i]];
    cum0[i + 1] = cum0[i] + oracle.mu0[order[i]];
  }
  std::vector<double> out;
  out.reserve(q_grid.size());
  for (const double q : q_grid) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("population_ad: q outside (0,1]");
    std::size_t top = static_cast<std::size_t>(
        std::llround(q * static_cast<double>(oracle.m)));
    top = std::clamp<std::size_t>(top, 1, oracle.m);
    out.push_back(cum1[top] / cum0[top]);
  }
  return out;
}

double true_population_ad(const DgpSpec& spec, double q, std::size_t m, std::uint64_t seed) {
  const auto oracle = make_oracle_points(spec, m, seed);
  std::vector<double> scores(m);
  for (std::size_t i = 0; i < m; ++i) scores[i] = oracle.mu1[i] / oracle.mu0[i];
  return population_ad(oracle, scores, q);
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::contrast: return "contrast";
    case Method::tworeg: return "tworeg";
    case Method::naive: return "naive";
    case Method::boost: return "boost";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "contrast") return Method::contrast;
  if (s == "tworeg") return Method::tworeg;
  if (s == "naive") return Method::naive;
  if (s == "boost") return Method::boost;
  throw std::invalid_argument("unknown method '" + s + "'; valid: contrast, tworeg, naive, boost");
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

namespace {
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rk(v.size());
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rk[order[k]] = avg;
    i = j + 1;
  }
  return rk;
}
}  // namespace

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson_correlation(ranks(a), ranks(b));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> StudyResult::bias() const {
  std::vector<double> b(delta0.size(), 0.0);
  for (const auto& err : contrast_error) {
    for (std::size_t j = 0; j < b.size(); ++j) b[j] += err[j];
  }
  for (double& v : b) v /= std::max<std::size_t>(contrast_error.size(), 1);
  return b;
}

std::vector<double> StudyResult::coverage() const {
  std::vector<double> c(delta0.size(), 0.0);
  for (const auto& cov : contrast_cover) {
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += cov[j];
  }
  for (double& v : c) v /= std::max<std::size_t>(contrast_cover.size(), 1);
  return c;
}

namespace {

struct ReplicateOutput {
  bool ok = false;
  std::string note;
  std::map<Method, double> pearson, spearman;
  std::map<Method, std::vector<double>> curve;
  std::vector<double> contrast_error;
  std::vector<int> contrast_cover;
  bool has_inference = false;
};

std::vector<double> boost_log_ratio_scores(const ObservationalDataset& ds,
                                           const std::vector<double>& weights0,
                                           const std::vector<double>& weights1,
                                           const BoostConfig& bcfg,
                                           const std::vector<double>& eval_z,
                                           std::size_t eval_n) {
  std::vector<std::size_t> rows[2];
  for (std::size_t i = 0; i < ds.n; ++i) rows[ds.r[i]].push_back(i);
  std::vector<double> pred[2];
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<double> za(rows[arm].size() * ds.d), ya(rows[arm].size()), wa;
    const auto& w = arm == 1 ? weights1 : weights0;
    if (!w.empty()) wa.resize(rows[arm].size());
    for (std::size_t a = 0; a < rows[arm].size(); ++a) {
      const std::size_t i = rows[arm][a];
      std::copy_n(&ds.z[i * ds.d], ds.d, &za[a * ds.d]);
      ya[a] = ds.y[i];
      if (!w.empty()) wa[a] = w[i];
    }
    const auto m = fit_boosted_poisson(za, rows[arm].size(), ds.d, ya, wa, bcfg);
    m.predict(eval_z, eval_n, ds.d, pred[arm]);
  }
  std::vector<double> s(eval_n);
  for (std::size_t i = 0; i < eval_n; ++i) {
    const double m1 = std::clamp(pred[1][i], 1e-3, 1e3);
    const double m0 = std::clamp(pred[0][i], 1e-3, 1e3);
    s[i] = std::log(m1) - std::log(m0);
  }
  return s;
}

}  // namespace

StudyResult run_study(const DgpSpec& spec, const std::vector<Method>& methods,
                      const StudyConfig& cfg_in) {
  if (methods.empty()) throw std::invalid_argument("run_study: no methods selected");
  StudyConfig cfg = cfg_in;
  if (cfg.q_grid.empty()) {
    for (int i = 1; i <= 10; ++i) cfg.q_grid.push_back(i / 10.0);
  }
  if (!cfg.nuisance.boost.n_trees) cfg.nuisance.boost.n_trees = 100;

  StudyResult result;
  result.setting = spec.name;
  result.methods = methods;
  result.q_grid = cfg.q_grid;
  if (spec.delta0) result.delta0 = *spec.delta0;

  OraclePoints oracle;
  if (cfg.with_curves) oracle = make_oracle_points(spec, cfg.oracle_draws, 1, cfg.tau);

  std::vector<ReplicateOutput> outputs(cfg.replicates);
  parallel_for(cfg.replicates, cfg.jobs, [&](std::size_t rep) {
    ReplicateOutput& out = outputs[rep];
    try {
      const std::uint64_t rep_seed = derive_seed(cfg.seed, Stream::replicate, rep);
      auto gen = generate(spec, cfg.n, rep_seed);

      std::map<Method, std::vector<double>> data_scores;   // on simulated rows
      std::map<Method, std::vector<double>> oracle_scores; // on oracle points

      auto score_linear = [&](const std::vector<double>& delta, Method m) {
        data_scores[m] = predict_log_cate(delta, gen.ds.z, gen.ds.n, gen.ds.d);
        if (cfg.with_curves) {
          oracle_scores[m] = predict_log_cate(delta, oracle.z, oracle.m, oracle.d);
        }
      };

      if (!spec.survival) {
        const auto ds = normalize_exposure(gen.ds);
        const auto plan = make_folds(ds.n, cfg.folds, ds.r, rep_seed);
        NuisanceBundle bundle;
        const bool needs_bundle =
            std::count(methods.begin(), methods.end(), Method::contrast) ||
            std::count(methods.begin(), methods.end(), Method::tworeg);
        if (needs_bundle) {
          NuisanceConfig ncfg = cfg.nuisance;
          ncfg.boost.seed = rep_seed;
          bundle = fit_nuisance_bundle(ds, plan, ncfg);
        }
        for (const Method m : methods) {
          switch (m) {
            case Method::contrast: {
              ContrastConfig ccfg;
              ccfg.symmetric = cfg.symmetric;
              ccfg.folds = cfg.folds;
              ccfg.replicates = 1;
              ccfg.solver = cfg.solver;
              ContrastFit fit = solve_contrast(ds, bundle, ccfg);
              if (!fit.solver_report.converged) {
                throw std::runtime_error("contrast solver did not converge");
              }
              if (cfg.partition_replicates > 1) {
                std::vector<double> sum = fit.delta;
                for (int pr = 1; pr < cfg.partition_replicates; ++pr) {
                  const auto plan2 = make_folds(ds.n, cfg.folds, ds.r,
                                                derive_seed(rep_seed, Stream::folds, pr));
                  NuisanceConfig ncfg = cfg.nuisance;
                  ncfg.boost.seed = derive_seed(rep_seed, Stream::folds, pr);
                  const auto b2 = fit_nuisance_bundle(ds, plan2, ncfg);
                  const auto f2 = solve_contrast(ds, b2, ccfg);
                  for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += f2.delta[j];
                }
                for (double& v : sum) v /= cfg.partition_replicates;
                fit.delta = sum;
              }
              score_linear(fit.delta, m);
              if (spec.delta0) {
                out.has_inference = true;
                const auto se = fit.standard_errors();
                out.contrast_error.resize(spec.delta0->size());
                out.contrast_cover.resize(spec.delta0->size());
                for (std::size_t j = 0; j < spec.delta0->size(); ++j) {
                  out.contrast_error[j] = fit.delta[j] - (*spec.delta0)[j];
                  out.contrast_cover[j] =
                      std::abs(out.contrast_error[j]) <= 1.96 * se[j] ? 1 : 0;
                }
              }
              break;
            }
            case Method::tworeg: {
              const auto fit = fit_two_regression(ds, bundle);
              score_linear(fit.delta_implied(), m);
              break;
            }
            case Method::naive: {
              const auto fit = fit_naive(ds);
              score_linear(fit.delta_implied(), m);
              break;
            }
            case Method::boost: {
              BoostConfig bcfg = cfg.nuisance.boost;
              bcfg.seed = rep_seed;
              data_scores[m] = boost_log_ratio_scores(ds, {}, {}, bcfg, ds.z, ds.n);
              if (cfg.with_curves) {
                oracle_scores[m] = boost_log_ratio_scores(ds, {}, {}, bcfg, oracle.z, oracle.m);
              }
              break;
            }
          }
        }
      } else {
        // survival pipeline
        const auto& ds = gen.ds;
        RmtlConfig rcfg;
        rcfg.tau = cfg.tau;
        rcfg.folds = cfg.folds;
        rcfg.replicates = 1;
        rcfg.seed = rep_seed;
        rcfg.symmetric = cfg.symmetric;
        rcfg.solver = cfg.solver;
        const auto plan = make_folds(ds.n, cfg.folds, ds.r, rep_seed);
        RmtlWorkspace work;
        const bool needs_work =
            std::count(methods.begin(), methods.end(), Method::contrast) ||
            std::count(methods.begin(), methods.end(), Method::tworeg);
        if (needs_work) work = fit_rmtl_nuisances(ds, plan, rcfg);
        for (const Method m : methods) {
          switch (m) {
            case Method::contrast: {
              const auto fit = solve_rmtl_contrast(ds, work, rcfg);
              if (!fit.solver_report.converged) {
                throw std::runtime_error("rmtl contrast solver did not converge");
              }
              score_linear(fit.delta, m);
              break;
            }
            case Method::tworeg: {
              const auto fit = fit_rmtl_two_regression(ds, work, rcfg);
              std::vector<double> delta(fit.beta1.size());
              for (std::size_t j = 0; j < delta.size(); ++j) {
                delta[j] = fit.beta1[j] - fit.beta0[j];
              }
              score_linear(delta, m);
              break;
            }
            case Method::naive: {
              const auto fit = fit_rmtl_naive(ds, cfg.tau);
              std::vector<double> delta(fit.beta1.size());
              for (std::size_t j = 0; j < delta.size(); ++j) {
                delta[j] = fit.beta1[j] - fit.beta0[j];
              }
              score_linear(delta, m);
              break;
            }
            case Method::boost: {
              // per-arm boosted RMTL with marginal-KM IPCW
              const auto cm = fit_censoring_km(ds, rcfg.floor_eps);
              std::vector<double> y(ds.n), w0(ds.n, 0.0), w1(ds.n, 0.0);
              for (std::size_t i = 0; i < ds.n; ++i) {
                const double x = ds.survival->time[i];
                const bool obs = ds.survival->status[i] == 1 || x >= cfg.tau;
                y[i] = obs ? cfg.tau - std::min(x, cfg.tau) : 0.0;
                const double l = ipcw_weight(x, ds.survival->status[i],
                                             cm.for_arm(ds.r[i]), cfg.tau);
                (ds.r[i] == 1 ? w1[i] : w0[i]) = l;
              }
              ObservationalDataset flat = ds;
              flat.y = y;
              BoostConfig bcfg = cfg.nuisance.boost;
              bcfg.seed = rep_seed;
              data_scores[m] = boost_log_ratio_scores(flat, w0, w1, bcfg, ds.z, ds.n);
              if (cfg.with_curves) {
                oracle_scores[m] =
                    boost_log_ratio_scores(flat, w0, w1, bcfg, oracle.z, oracle.m);
              }
              break;
            }
          }
        }
      }

      for (const Method m : methods) {
        out.pearson[m] = pearson_correlation(data_scores[m], gen.true_log_cate);
        out.spearman[m] = spearman_correlation(data_scores[m], gen.true_log_cate);
        if (cfg.with_curves) {
          out.curve[m] = population_ad_curve(oracle, oracle_scores[m], cfg.q_grid);
        }
      }
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.note = e.what();
    }
  });

  for (const Method m : methods) result.per_method[m] = {};
  for (const auto& out : outputs) {
    if (!out.ok) {
      ++result.failures;
      if (result.failure_notes.size() < 20) result.failure_notes.push_back(out.note);
      continue;
    }
    for (const Method m : methods) {
      auto& agg = result.per_method[m];
      agg.pearson.push_back(out.pearson.at(m));
      agg.spearman.push_back(out.spearman.at(m));
      if (cfg.with_curves) agg.true_curve.push_back(out.curve.at(m));
    }
    if (out.has_inference) {
      result.contrast_error.push_back(out.contrast_error);
      result.contrast_cover.push_back(out.contrast_cover);
    }
  }
  return result;
}

ToyReport toy_confounding_check(std::size_t n, std::uint64_t seed, bool randomized) {
  DgpSpec spec = DgpSpec::get(DgpName::toy_confounding);
  auto gen = generate(spec, n, seed);
  if (randomized) {
    // same quadratic truth but Z ~ N(0,1) in both arms
    auto rng = make_rng(seed, Stream::dgp, 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = gauss(rng);
      gen.ds.z[i] = z;
      std::poisson_distribution<long> pois(z * z);
      gen.ds.y[i] = z * z > 0.0 ? static_cast<double>(pois(rng)) : 0.0;
    }
  }
  const auto& ds = gen.ds;

  ToyReport rep;
  const auto naive = fit_naive(ds);
  rep.naive_beta1 = naive.beta1;
  rep.naive_beta0 = naive.beta0;
  rep.naive_slope_diff = naive.beta1[1] - naive.beta0[1];

  NuisanceConfig ncfg;
  ncfg.learner = OutcomeLearner::glm;
  const auto plan = make_folds(ds.n, 2, ds.r, seed);
  const auto bundle = fit_nuisance_bundle(ds, plan, ncfg);

  ContrastConfig ccfg;
  ccfg.replicates = 1;
  ccfg.folds = 2;
  const auto cfit = solve_contrast(ds, bundle, ccfg);
  rep.contrast_delta = cfit.delta;

  const auto tfit = fit_two_regression(ds, bundle);
  rep.tworeg_delta = tfit.delta_implied();
  return rep;
}

}  // namespace ratecate
