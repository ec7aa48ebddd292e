#pragma once
// Doubly robust contrast regression for the multiplicative CATE
// D(z) = exp(delta^T ztilde): cross-fitted estimating equation, damped
// Newton solve, sandwich covariance, and the population-level orthogonality
// diagnostics used by the property suites.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ratecate/dataset.hpp"
#include "ratecate/nuisance.hpp"

namespace ratecate {

struct SolverReport {
  int iterations = 0;
  double final_score_norm = 0.0;
  bool converged = false;
  std::string note;
};

struct ContrastFit {
  std::vector<double> delta;        // intercept first
  std::vector<double> covariance;   // (d+1)x(d+1) row-major, n^-1 A^-1 B A^-1
  SolverReport solver_report;
  int partition_replicates = 1;
  bool symmetric = true;

  std::size_t dim() const { return delta.size(); }
  double cov(std::size_t i, std::size_t j) const { return covariance[i * dim() + j]; }
  std::vector<double> standard_errors() const;
};

struct ContrastSolverConfig {
  double tol = 1e-8;        // max-norm of n^-1 S at the root
  int max_iter = 60;
  std::vector<double> init_delta;  // empty: start at 0 (the no-effect point)
};

struct ContrastConfig {
  bool symmetric = true;    // averaged equation; asymmetric form behind the flag
  std::size_t folds = 7;
  int replicates = 3;       // independent partition replicates, delta averaged
  std::uint64_t seed = 0;
  ContrastSolverConfig solver;
};

// The estimating function m(G; delta, mu, pi) for one observation, exactly
// as displayed: ztilde has the leading 1.
std::vector<double> estimating_function(double y, int r, const std::vector<double>& ztilde,
                                        const std::vector<double>& delta, double mu0_at_z,
                                        double pi1_at_z);

// Per-row inputs for one equation evaluation. row_weight covers the IPCW
// extension; empty means 1.
struct ContrastData {
  const DesignMatrix* X = nullptr;
  const std::vector<double>* y = nullptr;
  const std::vector<double>* r01 = nullptr;
  const std::vector<double>* mu0 = nullptr;
  const std::vector<double>* mu1 = nullptr;  // needed by the symmetric equation
  const std::vector<double>* pi1 = nullptr;
  const std::vector<double>* row_weight = nullptr;
};

// n^-1 sum of per-row estimating functions at delta.
std::vector<double> contrast_score(const ContrastData& data, const std::vector<double>& delta,
                                   bool symmetric);

// Newton solve of the (a)symmetric cross-fitted equation.
ContrastFit solve_contrast_core(const ContrastData& data, bool symmetric,
                                const ContrastSolverConfig& cfg);

// Theorem-style A-hat (negative derivative of the asymmetric equation) and
// B-hat (outer products of the per-row estimating function) at delta.
std::vector<double> a_hat_matrix(const ContrastData& data, const std::vector<double>& delta);
std::vector<double> b_hat_matrix(const ContrastData& data, const std::vector<double>& delta);

// n^-1 A^-1 B A^-1, symmetrized.
std::vector<double> sandwich_covariance(const ContrastData& data,
                                        const std::vector<double>& delta);
std::vector<double> sandwich_covariance(const ObservationalDataset& ds,
                                        const NuisanceBundle& bundle,
                                        const std::vector<double>& delta);

// Single-partition solve against a fitted bundle; covariance included.
ContrastFit solve_contrast(const ObservationalDataset& ds, const NuisanceBundle& bundle,
                           const ContrastConfig& cfg);

// Full driver: refits nuisances per partition replicate and averages delta;
// covariance comes from the first replicate.
ContrastFit fit_contrast(const ObservationalDataset& ds, const NuisanceConfig& nuisance,
                         const ContrastConfig& cfg);

// exp(delta^T ztilde) per row (and log-scale scores).
std::vector<double> predict_cate(const ContrastFit& fit, const std::vector<double>& z,
                                 std::size_t n, std::size_t d);
std::vector<double> predict_log_cate(const std::vector<double>& delta,
                                     const std::vector<double>& z, std::size_t n,
                                     std::size_t d);

// ---------------------------------------------------------------------------
// Population diagnostics on a finite covariate support.

struct DiscreteInstance {
  std::vector<double> prob;              // support probabilities, sum 1
  std::vector<std::vector<double>> z;    // support points (d-dim each)
  std::vector<double> mu0;               // true baseline mean per point
  std::vector<double> pi1;               // true propensity per point
  std::vector<double> delta0;            // true contrast, intercept first

  std::size_t size() const { return prob.size(); }
  double mu1_at(std::size_t j) const;    // mu0 * exp(delta0^T ztilde)
};

// Exact E[m(G; delta0, mu0 + r*dmu, pi1 + r*dpi)] over the support.
std::vector<double> population_estimating_function(const DiscreteInstance& inst, double r,
                                                   const std::vector<double>& dmu,
                                                   const std::vector<double>& dpi);

// Central finite-difference max-norm of d/dr E[m] at r; throws if the
// perturbed propensity leaves (0,1).
double orthogonality_check(const DiscreteInstance& inst, const std::vector<double>& dmu,
                           const std::vector<double>& dpi, double at_r = 0.0,
                           double step = 1e-3);

// Closed-form E[m] at perturbation scale r (the quadratic-in-r identity).
std::vector<double> orthogonality_closed_form(const DiscreteInstance& inst, double r,
                                              const std::vector<double>& dmu,
                                              const std::vector<double>& dpi);

// Root of the population equation with true nuisances, found by damped
// fixed-point iteration (independent of the Newton path).
std::vector<double> population_root_fixed_point(const DiscreteInstance& inst,
                                                double damping = 0.2, int max_iter = 200000,
                                                double tol = 1e-12);

}  // namespace ratecate
