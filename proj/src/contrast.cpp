#include "ratecate/contrast.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ratecate/kernels.hpp"
#include "ratecate/util.hpp"

namespace ratecate {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct RowTerms {
  std::vector<double> s;  // estimating-function multiplier per row
  std::vector<double> a;  // negative-derivative multiplier per row
};

// Per-row numerators/denominators of the estimating equation; data-parallel
// over rows (the SIMD kernels cover the exp and the column reductions, the
// arithmetic below auto-vectorizes).
void row_terms(const ContrastData& d, const std::vector<double>& expeta, bool symmetric,
               RowTerms& out) {
  const std::size_t n = d.X->n;
  const auto& y = *d.y;
  const auto& r = *d.r01;
  const auto& mu0 = *d.mu0;
  const auto& pi1 = *d.pi1;
  const double* L = d.row_weight ? d.row_weight->data() : nullptr;
  out.s.resize(n);
  out.a.resize(n);
  if (symmetric) {
    const auto& mu1 = *d.mu1;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = expeta[i];
      const double p1 = pi1[i];
      const double p0 = 1.0 - p1;
      const double D = e * p1 + p0;
      const double mbar = 0.5 * (e * mu0[i] + mu1[i]);
      const double num = r[i] * (y[i] - mbar) * p0 - (1.0 - r[i]) * (y[i] * e - mbar) * p1;
      const double s = num / D;
      const double dnum = r[i] * p0 * (-0.5 * e * mu0[i]) -
                          (1.0 - r[i]) * p1 * (y[i] * e - 0.5 * e * mu0[i]);
      const double ds = dnum / D - s * (p1 * e / D);
      const double w = L ? L[i] : 1.0;
      out.s[i] = w * s;
      out.a[i] = -w * ds;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double e = expeta[i];
      const double p1 = pi1[i];
      const double p0 = 1.0 - p1;
      const double D = e * p1 + p0;
      const double num =
          p0 * r[i] * y[i] - p1 * (1.0 - r[i]) * y[i] * e - mu0[i] * e * (r[i] - p1);
      // dS/ddelta = -A exactly for this form: the per-row derivative is
      // -w_hat * (y + mu0/pi1 * (r - pi1)).
      const double what = e * p1 * p0 / (D * D);
      const double w = L ? L[i] : 1.0;
      out.s[i] = w * num / D;
      out.a[i] = w * what * (y[i] + mu0[i] / p1 * (r[i] - p1));
    }
  }
}

void check_data(const ContrastData& d, bool symmetric) {
  if (!d.X || !d.y || !d.r01 || !d.mu0 || !d.pi1) {
    throw std::invalid_argument("contrast: missing data fields");
  }
  if (symmetric && !d.mu1) {
    throw std::invalid_argument("contrast: symmetric equation needs mu1 predictions");
  }
  const std::size_t n = d.X->n;
  if (d.y->size() != n || d.r01->size() != n || d.mu0->size() != n || d.pi1->size() != n ||
      (d.mu1 && d.mu1->size() != n) || (d.row_weight && d.row_weight->size() != n)) {
    throw std::invalid_argument("contrast: row count mismatch");
  }
}

void expeta_at(const ContrastData& d, const std::vector<double>& delta,
               std::vector<double>& eta, std::vector<double>& expeta) {
  d.X->linear_predictor(delta, eta);
  expeta.resize(eta.size());
  kern::vexp(eta.data(), expeta.data(), eta.size());
}

Vector score_from_terms(const ContrastData& d, const RowTerms& t) {
  const std::size_t p = d.X->p;
  Vector S(p);
  const double inv_n = 1.0 / static_cast<double>(d.X->n);
  for (std::size_t j = 0; j < p; ++j) {
    S(j) = inv_n * kern::dot(t.s.data(), d.X->col(j), d.X->n);
  }
  return S;
}

Matrix gram_from(const ContrastData& d, const std::vector<double>& w) {
  const std::size_t p = d.X->p;
  Matrix G(p, p);
  const double inv_n = 1.0 / static_cast<double>(d.X->n);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      const double v = inv_n * kern::wdot(w.data(), d.X->col(a), d.X->col(b), d.X->n);
      G(a, b) = v;
      G(b, a) = v;
    }
  }
  return G;
}

std::vector<double> flatten(const Matrix& M) {
  std::vector<double> out(M.rows() * M.cols());
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out[i * M.cols() + j] = M(i, j);
  }
  return out;
}

}  // namespace

std::vector<double> ContrastFit::standard_errors() const {
  std::vector<double> se(dim());
  for (std::size_t j = 0; j < dim(); ++j) se[j] = std::sqrt(std::max(cov(j, j), 0.0));
  return se;
}

std::vector<double> estimating_function(double y, int r, const std::vector<double>& ztilde,
                                        const std::vector<double>& delta, double mu0_at_z,
                                        double pi1_at_z) {
  if (ztilde.size() != delta.size()) {
    throw std::invalid_argument("estimating_function: dimension mismatch");
  }
  if (!(pi1_at_z > 0.0 && pi1_at_z < 1.0)) {
    throw std::invalid_argument("estimating_function: pi1 must lie in (0,1)");
  }
  double g = 0.0;
  for (std::size_t j = 0; j < delta.size(); ++j) g += delta[j] * ztilde[j];
  const double e = std::exp(g);
  const double p1 = pi1_at_z;
  const double p0 = 1.0 - p1;
  const double D = e * p1 + p0;
  const double num = p0 * r * y - p1 * (1 - r) * y * e - mu0_at_z * e * (r - p1);
  std::vector<double> out(ztilde.size());
  for (std::size_t j = 0; j < ztilde.size(); ++j) out[j] = ztilde[j] * num / D;
  return out;
}

std::vector<double> contrast_score(const ContrastData& data, const std::vector<double>& delta,
                                   bool symmetric) {
  check_data(data, symmetric);
  std::vector<double> eta, expeta;
  expeta_at(data, delta, eta, expeta);
  RowTerms t;
  row_terms(data, expeta, symmetric, t);
  const Vector S = score_from_terms(data, t);
  return std::vector<double>(S.data(), S.data() + S.size());
}

ContrastFit solve_contrast_core(const ContrastData& data, bool symmetric,
                                const ContrastSolverConfig& cfg) {
  check_data(data, symmetric);
  const std::size_t p = data.X->p;
  std::vector<double> delta = cfg.init_delta.empty() ? std::vector<double>(p, 0.0)
                                                     : cfg.init_delta;
  if (delta.size() != p) throw std::invalid_argument("init_delta has wrong length");

  std::vector<double> eta, expeta;
  RowTerms t;
  ContrastFit fit;
  fit.symmetric = symmetric;

  expeta_at(data, delta, eta, expeta);
  row_terms(data, expeta, symmetric, t);
  Vector S = score_from_terms(data, t);
  double snorm = S.lpNorm<Eigen::Infinity>();

  for (int it = 0; it < cfg.max_iter; ++it) {
    if (snorm <= cfg.tol) {
      fit.solver_report.converged = true;
      break;
    }
    const Matrix J = gram_from(data, t.a);  // negative derivative of the score
    Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible()) {
      fit.solver_report.note =
          "singular derivative matrix (rcond ~ " +
          std::to_string(lu.rcond()) + ") at iteration " + std::to_string(it);
      break;
    }
    const Vector step = lu.solve(S);  // delta <- delta + J^-1 S since dS = -J
    double tstep = 1.0;
    bool moved = false;
    for (int h = 0; h < 20; ++h) {
      std::vector<double> cand(p);
      for (std::size_t j = 0; j < p; ++j) cand[j] = delta[j] + tstep * step(j);
      expeta_at(data, cand, eta, expeta);
      RowTerms tc;
      row_terms(data, expeta, symmetric, tc);
      const Vector Sc = score_from_terms(data, tc);
      const double cnorm = Sc.lpNorm<Eigen::Infinity>();
      if (std::isfinite(cnorm) && cnorm < snorm) {
        delta = std::move(cand);
        t = std::move(tc);
        S = Sc;
        snorm = cnorm;
        moved = true;
        break;
      }
      tstep *= 0.5;
    }
    fit.solver_report.iterations = it + 1;
    if (!moved) {
      fit.solver_report.note = "step-halving exhausted";
      break;
    }
  }
  fit.solver_report.final_score_norm = snorm;
  if (snorm <= cfg.tol) fit.solver_report.converged = true;
  fit.delta = std::move(delta);
  return fit;
}

std::vector<double> a_hat_matrix(const ContrastData& data, const std::vector<double>& delta) {
  check_data(data, false);
  std::vector<double> eta, expeta;
  expeta_at(data, delta, eta, expeta);
  RowTerms t;
  row_terms(data, expeta, false, t);
  return flatten(gram_from(data, t.a));
}

std::vector<double> b_hat_matrix(const ContrastData& data, const std::vector<double>& delta) {
  check_data(data, false);
  std::vector<double> eta, expeta;
  expeta_at(data, delta, eta, expeta);
  RowTerms t;
  row_terms(data, expeta, false, t);
  std::vector<double> s2(t.s.size());
  for (std::size_t i = 0; i < t.s.size(); ++i) s2[i] = t.s[i] * t.s[i];
  return flatten(gram_from(data, s2));
}

std::vector<double> sandwich_covariance(const ContrastData& data,
                                        const std::vector<double>& delta) {
  const std::size_t p = data.X->p;
  const auto Af = a_hat_matrix(data, delta);
  const auto Bf = b_hat_matrix(data, delta);
  Matrix A(p, p), B(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      A(i, j) = Af[i * p + j];
      B(i, j) = Bf[i * p + j];
    }
  }
  Eigen::FullPivLU<Matrix> lu(A);
  if (!lu.isInvertible()) {
    throw std::runtime_error("sandwich_covariance: singular A-hat (rcond ~ " +
                             std::to_string(lu.rcond()) + ")");
  }
  const Matrix Ainv = lu.inverse();
  Matrix V = Ainv * B * Ainv.transpose() / static_cast<double>(data.X->n);
  V = 0.5 * (V + V.transpose()).eval();
  return flatten(V);
}

namespace {

ContrastData bundle_data(const DesignMatrix& X, const ObservationalDataset& ds,
                         const std::vector<double>& r01, const NuisanceBundle& bundle) {
  ContrastData d;
  d.X = &X;
  d.y = &ds.y;
  d.r01 = &r01;
  d.mu0 = &bundle.mu0_cf;
  d.mu1 = &bundle.mu1_cf;
  d.pi1 = &bundle.pi1_cf;
  return d;
}

}  // namespace

std::vector<double> sandwich_covariance(const ObservationalDataset& ds,
                                        const NuisanceBundle& bundle,
                                        const std::vector<double>& delta) {
  const auto X = DesignMatrix::from_dataset(ds);
  std::vector<double> r01(ds.r.begin(), ds.r.end());
  return sandwich_covariance(bundle_data(X, ds, r01, bundle), delta);
}

ContrastFit solve_contrast(const ObservationalDataset& ds, const NuisanceBundle& bundle,
                           const ContrastConfig& cfg) {
  if (bundle.mu0_cf.size() != ds.n) {
    throw std::invalid_argument("solve_contrast: bundle does not match dataset");
  }
  const auto X = DesignMatrix::from_dataset(ds);
  std::vector<double> r01(ds.r.begin(), ds.r.end());
  const auto data = bundle_data(X, ds, r01, bundle);
  ContrastFit fit = solve_contrast_core(data, cfg.symmetric, cfg.solver);
  fit.covariance = sandwich_covariance(data, fit.delta);
  return fit;
}

ContrastFit fit_contrast(const ObservationalDataset& ds, const NuisanceConfig& nuisance,
                         const ContrastConfig& cfg) {
  ContrastFit first;
  std::vector<double> delta_sum;
  const int reps = std::max(cfg.replicates, 1);
  for (int rep = 0; rep < reps; ++rep) {
    const auto plan =
        make_folds(ds.n, cfg.folds, ds.r, derive_seed(cfg.seed, Stream::replicate, rep));
    const auto bundle = fit_nuisance_bundle(ds, plan, nuisance);
    ContrastFit fit = solve_contrast(ds, bundle, cfg);
    if (!fit.solver_report.converged) {
      throw std::runtime_error("contrast solver failed on partition replicate " +
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

std::vector<double> predict_log_cate(const std::vector<double>& delta,
                                     const std::vector<double>& z, std::size_t n,
                                     std::size_t d) {
  if (delta.size() != d + 1) throw std::invalid_argument("predict: dimension mismatch");
  const auto X = DesignMatrix::from_covariates(z, n, d);
  std::vector<double> eta;
  X.linear_predictor(delta, eta);
  return eta;
}

std::vector<double> predict_cate(const ContrastFit& fit, const std::vector<double>& z,
                                 std::size_t n, std::size_t d) {
  auto eta = predict_log_cate(fit.delta, z, n, d);
  std::vector<double> out(n);
  kern::vexp(eta.data(), out.data(), n);
  return out;
}

// ---------------------------------------------------------------------------

double DiscreteInstance::mu1_at(std::size_t j) const {
  double g = delta0[0];
  for (std::size_t a = 0; a < z[j].size(); ++a) g += delta0[a + 1] * z[j][a];
  return mu0[j] * std::exp(g);
}

std::vector<double> population_estimating_function(const DiscreteInstance& inst, double r,
                                                   const std::vector<double>& dmu,
                                                   const std::vector<double>& dpi) {
  const std::size_t p = inst.delta0.size();
  std::vector<double> out(p, 0.0);
  for (std::size_t j = 0; j < inst.size(); ++j) {
    double g = inst.delta0[0];
    for (std::size_t a = 0; a < inst.z[j].size(); ++a) g += inst.delta0[a + 1] * inst.z[j][a];
    const double e = std::exp(g);
    const double mu = inst.mu0[j] + r * dmu[j];
    const double pi = inst.pi1[j] + r * dpi[j];
    if (!(pi > 0.0 && pi < 1.0)) {
      throw std::invalid_argument("population_estimating_function: perturbed pi exits (0,1)");
    }
    const double p1t = inst.pi1[j];           // true propensity
    const double mu1 = inst.mu1_at(j);
    const double D = e * pi + 1.0 - pi;
    // E[m | Z=z_j]: E[RY]=pi1*mu1, E[(1-R)Y]=(1-pi1)*mu0, E[R-pi]=pi1-pi.
    const double num = (1.0 - pi) * p1t * mu1 - pi * (1.0 - p1t) * inst.mu0[j] * e -
                       mu * e * (p1t - pi);
    const double val = num / D;
    out[0] += inst.prob[j] * val;
    for (std::size_t a = 0; a < inst.z[j].size(); ++a) {
      out[a + 1] += inst.prob[j] * inst.z[j][a] * val;
    }
  }
  return out;
}

double orthogonality_check(const DiscreteInstance& inst, const std::vector<double>& dmu,
                           const std::vector<double>& dpi, double at_r, double step) {
  const auto up = population_estimating_function(inst, at_r + step, dmu, dpi);
  const auto dn = population_estimating_function(inst, at_r - step, dmu, dpi);
  double norm = 0.0;
  for (std::size_t j = 0; j < up.size(); ++j) {
    norm = std::max(norm, std::abs((up[j] - dn[j]) / (2.0 * step)));
  }
  return norm;
}

std::vector<double> orthogonality_closed_form(const DiscreteInstance& inst, double r,
                                              const std::vector<double>& dmu,
                                              const std::vector<double>& dpi) {
  const std::size_t p = inst.delta0.size();
  std::vector<double> out(p, 0.0);
  for (std::size_t j = 0; j < inst.size(); ++j) {
    double g = inst.delta0[0];
    for (std::size_t a = 0; a < inst.z[j].size(); ++a) g += inst.delta0[a + 1] * inst.z[j][a];
    const double e = std::exp(g);
    const double h2 = e * (inst.pi1[j] + r * dpi[j]) + (1.0 - inst.pi1[j]) - r * dpi[j];
    const double val = r * r * e * dpi[j] * dmu[j] / h2;
    out[0] += inst.prob[j] * val;
    for (std::size_t a = 0; a < inst.z[j].size(); ++a) {
      out[a + 1] += inst.prob[j] * inst.z[j][a] * val;
    }
  }
  return out;
}

std::vector<double> population_root_fixed_point(const DiscreteInstance& inst, double damping,
                                                int max_iter, double tol) {
  const std::size_t p = inst.delta0.size();
  std::vector<double> delta(p, 0.0);
  for (int it = 0; it < max_iter; ++it) {
    // Population score at `delta` with true nuisances plugged in:
    // E[m | Z=z_j] reduces to w1 * (mu1 - mu0 e^g) per support point.
    std::vector<double> S(p, 0.0);
    for (std::size_t j = 0; j < inst.size(); ++j) {
      double g = delta[0];
      for (std::size_t a = 0; a < inst.z[j].size(); ++a) g += delta[a + 1] * inst.z[j][a];
      const double e = std::exp(g);
      const double p1 = inst.pi1[j];
      const double D = e * p1 + 1.0 - p1;
      const double num = (1.0 - p1) * p1 * inst.mu1_at(j) - p1 * (1.0 - p1) * inst.mu0[j] * e;
      const double val = num / D;
      S[0] += inst.prob[j] * val;
      for (std::size_t a = 0; a < inst.z[j].size(); ++a) {
        S[a + 1] += inst.prob[j] * inst.z[j][a] * val;
      }
    }
    double norm = 0.0;
    for (double v : S) norm = std::max(norm, std::abs(v));
    if (norm <= tol) break;
    for (std::size_t j = 0; j < p; ++j) delta[j] += damping * S[j];
  }
  return delta;
}

}  // namespace ratecate
