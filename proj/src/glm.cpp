#include "ratecate/glm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ratecate/kernels.hpp"

namespace ratecate {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Gram matrix sum_i w_i x_i x_i^T over the kept columns.
Matrix weighted_gram(const DesignMatrix& X, const std::vector<double>& w,
                     const std::vector<std::size_t>& keep) {
  const std::size_t q = keep.size();
  Matrix G(q, q);
  for (std::size_t a = 0; a < q; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      const double v = kern::wdot(w.data(), X.col(keep[a]), X.col(keep[b]), X.n);
      G(a, b) = v;
      G(b, a) = v;
    }
  }
  return G;
}

Vector weighted_score(const DesignMatrix& X, const std::vector<double>& resid,
                      const std::vector<std::size_t>& keep) {
  Vector g(keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    g(a) = kern::dot(resid.data(), X.col(keep[a]), X.n);
  }
  return g;
}

void expand_coefficients(const Vector& reduced, const std::vector<std::size_t>& keep,
                         std::size_t p, std::vector<double>& full) {
  full.assign(p, 0.0);
  for (std::size_t a = 0; a < keep.size(); ++a) full[keep[a]] = reduced(a);
}

void eta_from(const DesignMatrix& X, const Vector& beta,
              const std::vector<std::size_t>& keep, std::vector<double>& eta) {
  eta.assign(X.n, 0.0);
  for (std::size_t a = 0; a < keep.size(); ++a) {
    if (beta(a) != 0.0) kern::axpy(beta(a), X.col(keep[a]), eta.data(), X.n);
  }
}

}  // namespace

std::vector<std::size_t> independent_columns(const DesignMatrix& X, double rel_tol) {
  std::vector<std::size_t> keep;
  std::vector<std::vector<double>> basis;  // orthonormalized kept columns
  for (std::size_t j = 0; j < X.p; ++j) {
    std::vector<double> v(X.col(j), X.col(j) + X.n);
    const double orig = std::sqrt(kern::dot(v.data(), v.data(), X.n));
    if (orig == 0.0) continue;
    for (const auto& b : basis) {
      const double proj = kern::dot(b.data(), v.data(), X.n);
      kern::axpy(-proj, b.data(), v.data(), X.n);
    }
    const double resid = std::sqrt(kern::dot(v.data(), v.data(), X.n));
    if (resid <= rel_tol * orig) continue;  // dependent on earlier columns
    for (double& x : v) x /= resid;
    basis.push_back(std::move(v));
    keep.push_back(j);
  }
  return keep;
}

void PropensityModel::predict(const DesignMatrix& X, std::vector<double>& out) const {
  std::vector<double> eta;
  X.linear_predictor(coefficients, eta);
  for (double& e : eta) e = -e;
  out.resize(X.n);
  kern::vexp(eta.data(), out.data(), X.n);
  const double lo = clip_eps, hi = 1.0 - clip_eps;
  for (double& v : out) v = std::clamp(1.0 / (1.0 + v), lo, hi);
}

void PoissonGlmModel::predict(const DesignMatrix& X, std::vector<double>& out) const {
  std::vector<double> eta;
  X.linear_predictor(coefficients, eta);
  out.resize(X.n);
  kern::vexp(eta.data(), out.data(), X.n);
}

PropensityModel fit_logistic(const DesignMatrix& X, const std::vector<double>& r01,
                             const GlmConfig& cfg) {
  if (r01.size() != X.n) throw std::invalid_argument("fit_logistic: length mismatch");
  const double n1 = kern::sum(r01.data(), X.n);
  if (!(n1 > 0.0) || !(n1 < static_cast<double>(X.n))) {
    throw std::invalid_argument("fit_logistic: both classes must be present");
  }
  const auto keep = independent_columns(X);
  const std::size_t q = keep.size();

  auto run = [&](double lambda, Vector& beta, IrlsReport& rep) {
    std::vector<double> eta(X.n), p(X.n), w(X.n), resid(X.n);
    auto nll = [&](const Vector& b) {
      eta_from(X, b, keep, eta);
      double v = 0.0;
      for (std::size_t i = 0; i < X.n; ++i) {
        // -loglik = log(1+e^eta) - r*eta, stably
        const double e = eta[i];
        v += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - r01[i] * e;
      }
      return v + 0.5 * lambda * b.squaredNorm();
    };
    beta = Vector::Zero(q);
    double cur = nll(beta);
    rep = {};
    for (rep.iterations = 0; rep.iterations < cfg.max_iter; ++rep.iterations) {
      eta_from(X, beta, keep, eta);
      for (std::size_t i = 0; i < X.n; ++i) {
        const double pi = 1.0 / (1.0 + std::exp(-eta[i]));
        p[i] = pi;
        w[i] = pi * (1.0 - pi);
        resid[i] = r01[i] - pi;
      }
      Vector g = weighted_score(X, resid, keep) - lambda * beta;
      rep.score_norm = g.lpNorm<Eigen::Infinity>();
      if (rep.score_norm <= cfg.tol) {
        rep.converged = true;
        break;
      }
      Matrix H = weighted_gram(X, w, keep);
      H.diagonal().array() += lambda + 1e-12;
      Vector step = H.ldlt().solve(g);
      double t = 1.0;
      for (int h = 0; h < 30; ++h) {
        const double cand = nll(beta + t * step);
        if (cand <= cur + 1e-12 * std::abs(cur)) {
          beta += t * step;
          cur = cand;
          break;
        }
        t *= 0.5;
        if (h == 29) rep.iterations = cfg.max_iter;  // stalled
      }
    }
  };

  Vector beta;
  IrlsReport rep;
  run(0.0, beta, rep);
  // Quasi-separation: diverging coefficients with a flat likelihood. Refit
  // with a ridge penalty so the fitted propensities stay interior.
  const bool diverged = beta.lpNorm<Eigen::Infinity>() > 15.0 || !beta.allFinite();
  if (diverged || !rep.converged) {
    Vector beta_r;
    IrlsReport rep_r;
    run(cfg.ridge_scale * static_cast<double>(X.n), beta_r, rep_r);
    if (diverged || (!rep.converged && rep_r.converged)) {
      beta = beta_r;
      rep = rep_r;
      rep.ridge_applied = true;
    }
  }

  PropensityModel model;
  model.report = rep;
  for (std::size_t j = 0, a = 0; j < X.p; ++j) {
    if (a < keep.size() && keep[a] == j) {
      ++a;
    } else {
      model.report.dropped_columns.push_back(j);
    }
  }
  expand_coefficients(beta, keep, X.p, model.coefficients);
  return model;
}

PoissonGlmModel fit_poisson_glm(const DesignMatrix& X, const std::vector<double>& y,
                                const std::vector<double>& weights, const GlmConfig& cfg) {
  if (y.size() != X.n) throw std::invalid_argument("fit_poisson_glm: length mismatch");
  std::vector<double> w = weights.empty() ? std::vector<double>(X.n, 1.0) : weights;
  if (w.size() != X.n) throw std::invalid_argument("fit_poisson_glm: weight length mismatch");
  const double wy = kern::dot(w.data(), y.data(), X.n);
  if (!(wy > 0.0)) {
    throw std::invalid_argument("fit_poisson_glm: sum of weighted outcomes must be positive");
  }
  const auto keep = independent_columns(X);
  const std::size_t q = keep.size();

  std::vector<double> eta(X.n), mu(X.n), resid(X.n), hw(X.n);
  auto deviance = [&](const Vector& b) {
    eta_from(X, b, keep, eta);
    kern::vexp(eta.data(), mu.data(), X.n);
    double dev = 0.0;
    for (std::size_t i = 0; i < X.n; ++i) {
      const double yi = y[i];
      dev += w[i] * ((yi > 0.0 ? yi * std::log(yi / mu[i]) : 0.0) - (yi - mu[i]));
    }
    return 2.0 * dev;
  };

  Vector beta = Vector::Zero(q);
  beta(0) = std::log(wy / kern::sum(w.data(), X.n));  // keep[0] is the intercept column
  double cur = deviance(beta);
  IrlsReport rep;
  for (rep.iterations = 0; rep.iterations < cfg.max_iter; ++rep.iterations) {
    eta_from(X, beta, keep, eta);
    kern::vexp(eta.data(), mu.data(), X.n);
    for (std::size_t i = 0; i < X.n; ++i) {
      resid[i] = w[i] * (y[i] - mu[i]);
      hw[i] = w[i] * mu[i];
    }
    Vector g = weighted_score(X, resid, keep);
    rep.score_norm = g.lpNorm<Eigen::Infinity>();
    if (rep.score_norm <= cfg.tol) {
      rep.converged = true;
      break;
    }
    Matrix H = weighted_gram(X, hw, keep);
    H.diagonal().array() += 1e-12;
    Vector step = H.ldlt().solve(g);
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 30; ++h) {
      const double cand = deviance(beta + t * step);
      if (std::isfinite(cand) && cand <= cur + 1e-10 * (1.0 + std::abs(cur))) {
        beta += t * step;
        cur = cand;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;  // step-halving exhausted
  }

  PoissonGlmModel model;
  model.report = rep;
  for (std::size_t j = 0, a = 0; j < X.p; ++j) {
    if (a < keep.size() && keep[a] == j) {
      ++a;
    } else {
      model.report.dropped_columns.push_back(j);
    }
  }
  expand_coefficients(beta, keep, X.p, model.coefficients);
  return model;
}

}  // namespace ratecate
