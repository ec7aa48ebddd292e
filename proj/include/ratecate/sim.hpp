#pragma once
// Data-generating processes for the simulation study, exact population
// oracles (true CATE, population AD curves over a quasi-random covariate
// cloud), the replicate runner and its aggregates.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ratecate/contrast.hpp"
#include "ratecate/dataset.hpp"
#include "ratecate/nuisance.hpp"
#include "ratecate/tworeg.hpp"

namespace ratecate {

enum class DgpName {
  setting1_contrast,
  setting2_poisson,
  setting3_mild,
  setting4_large,
  surv1,
  surv2,
  toy_confounding,
};

DgpName dgp_from_string(const std::string& name);
std::string dgp_to_string(DgpName name);
std::vector<std::string> dgp_names();

struct DgpSpec {
  DgpName name;
  std::size_t d = 10;
  bool survival = false;
  std::optional<std::vector<double>> delta0;  // when log D is exactly linear

  double mu1(const double* z) const;  // count: rate; survival: hazard lambda_1
  double mu0(const double* z) const;
  double pi1(const double* z) const;
  double true_log_cate(const double* z, double tau = 0.75) const;

  static DgpSpec get(DgpName name);
};

struct GeneratedData {
  ObservationalDataset ds;            // count specs carry exposure F
  std::vector<double> true_log_cate;  // hidden truth per row
};

// Deterministic given (spec, n, seed). Count outcomes: Z clipped at +-2,
// R ~ Bern(pi1), F ~ U(0, 0.75], Y ~ Pois(mu_R(Z) F). Survival outcomes:
// T ~ Exp(lambda_R(Z)), C = min(U[0.5,1], Exp(exp(0.25+z3))).
GeneratedData generate(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

// Fixed quasi-random covariate cloud with exact per-point means; outcomes
// enter analytically, so population quantities have no outcome noise.
struct OraclePoints {
  std::size_t m = 0;
  std::size_t d = 10;
  std::vector<double> z;    // row-major m x d
  std::vector<double> mu1;  // count: rates; survival: RMTL means
  std::vector<double> mu0;
};

OraclePoints make_oracle_points(const DgpSpec& spec, std::size_t m, std::uint64_t seed,
                                double tau = 0.75);

// Population AD of the subgroup holding the top-q fraction of `scores`.
double population_ad(const OraclePoints& oracle, const std::vector<double>& scores, double q);
std::vector<double> population_ad_curve(const OraclePoints& oracle,
                                        const std::vector<double>& scores,
                                        const std::vector<double>& q_grid);

// Spec-level convenience: scores = true D on m quasi-random draws.
double true_population_ad(const DgpSpec& spec, double q, std::size_t m = 1000000,
                          std::uint64_t seed = 1);

enum class Method { contrast, tworeg, naive, boost };
std::string method_to_string(Method m);
Method method_from_string(const std::string& s);

struct StudyConfig {
  std::size_t n = 5000;
  int replicates = 200;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::size_t folds = 2;
  int partition_replicates = 1;
  NuisanceConfig nuisance;      // defaults set in run_study: boosted, 100 trees
  ContrastSolverConfig solver;
  bool symmetric = true;
  std::vector<double> q_grid;   // default 0.1..1.0
  std::size_t oracle_draws = 200000;
  bool with_curves = true;
  double tau = 0.75;
};

struct MethodAggregate {
  std::vector<double> pearson;                // per surviving replicate
  std::vector<double> spearman;
  std::vector<std::vector<double>> true_curve;  // per replicate, per q point
};

struct StudyResult {
  DgpName setting;
  std::vector<Method> methods;
  std::map<Method, MethodAggregate> per_method;
  std::vector<double> q_grid;
  // contrast-only inference against delta0 (when the model holds):
  std::vector<double> delta0;
  std::vector<std::vector<double>> contrast_error;  // per replicate, per coordinate
  std::vector<std::vector<int>> contrast_cover;     // 95% Wald cover indicators
  int failures = 0;
  std::vector<std::string> failure_notes;

  std::vector<double> bias() const;      // mean contrast error per coordinate
  std::vector<double> coverage() const;  // mean cover rate per coordinate
};

StudyResult run_study(const DgpSpec& spec, const std::vector<Method>& methods,
                      const StudyConfig& cfg);

// The univariate confounding example: quadratic truth, Gaussian covariate
// shift between arms, D(z) = 1.
struct ToyReport {
  std::vector<double> naive_beta1;
  std::vector<double> naive_beta0;
  double naive_slope_diff = 0.0;       // implied log-CATE slope
  std::vector<double> contrast_delta;
  std::vector<double> tworeg_delta;
};

ToyReport toy_confounding_check(std::size_t n, std::uint64_t seed, bool randomized = false);

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);
double median(std::vector<double> v);

}  // namespace ratecate
