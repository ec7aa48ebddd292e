#include "ratecate/json_io.hpp"

#include <cmath>
#include <functional>

namespace ratecate {

namespace {

constexpr const char* kVersion = "0.1.0";

json tree_to_json(const Tree& tree) {
  std::function<json(int)> rec = [&](int node) -> json {
    const auto& nd = tree[node];
    if (nd.feature < 0) return json{{"value", nd.value}};
    return json{{"feature", nd.feature},
                {"threshold", nd.threshold},
                {"left", rec(nd.left)},
                {"right", rec(nd.right)}};
  };
  return rec(0);
}

void tree_from_json(const json& j, Tree& tree) {
  const int node = static_cast<int>(tree.size());
  tree.push_back(TreeNode{});
  if (j.contains("value")) {
    tree[node].value = j.at("value").get<double>();
    return;
  }
  tree[node].feature = j.at("feature").get<int>();
  tree[node].threshold = j.at("threshold").get<double>();
  tree[node].left = static_cast<int>(tree.size());
  tree_from_json(j.at("left"), tree);
  tree[node].right = static_cast<int>(tree.size());
  tree_from_json(j.at("right"), tree);
}

json report_to_json(const IrlsReport& r) {
  return json{{"converged", r.converged},
              {"iterations", r.iterations},
              {"score_norm", r.score_norm},
              {"ridge_applied", r.ridge_applied},
              {"dropped_columns", r.dropped_columns}};
}

}  // namespace

json to_json(const PropensityModel& m) {
  return json{{"type", "logistic"},
              {"coefficients", m.coefficients},
              {"clip_eps", m.clip_eps},
              {"report", report_to_json(m.report)}};
}

json to_json(const PoissonGlmModel& m) {
  return json{{"type", "poisson_glm"},
              {"coefficients", m.coefficients},
              {"report", report_to_json(m.report)}};
}

json to_json(const BoostedPoissonModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  return json{{"type", "boosted_poisson"},
              {"base_score", m.base_score},
              {"learning_rate", m.learning_rate},
              {"cv_selected_trees", m.cv_selected_trees},
              {"trees", trees}};
}

json to_json(const ContrastFit& fit) {
  const auto se = fit.standard_errors();
  json z = json::array();
  for (std::size_t j = 0; j < fit.delta.size(); ++j) {
    z.push_back(se[j] > 0.0 ? fit.delta[j] / se[j] : 0.0);
  }
  return json{{"type", "contrast_fit"},
              {"delta", fit.delta},
              {"covariance", fit.covariance},
              {"standard_errors", se},
              {"wald_z", z},
              {"symmetric", fit.symmetric},
              {"partition_replicates", fit.partition_replicates},
              {"solver",
               {{"iterations", fit.solver_report.iterations},
                {"final_score_norm", fit.solver_report.final_score_norm},
                {"converged", fit.solver_report.converged},
                {"note", fit.solver_report.note}}}};
}

json to_json(const TwoRegressionFit& fit) {
  auto arm = [](const ArmCalibration& c) {
    return json{{"alpha", c.alpha},
                {"gamma", c.gamma},
                {"dropped_gamma", c.dropped_gamma}};
  };
  return json{{"type", "two_regression_fit"},
              {"beta0", fit.beta0},
              {"beta1", fit.beta1},
              {"delta_implied", fit.delta_implied()},
              {"calibration",
               {{"source", fit.calibration.source},
                {"arm0", arm(fit.calibration.arm0)},
                {"arm1", arm(fit.calibration.arm1)}}}};
}

json to_json(const ValidationCurve& curve) {
  json grid = json::array();
  for (const auto& pt : curve.grid) {
    json rec{{"q", pt.q},
             {"threshold", std::isinf(pt.threshold) ? json() : json(pt.threshold)}};
    if (pt.estimate) {
      rec["m_c"] = pt.estimate->m_c;
      rec["mu1"] = pt.estimate->mu1_hat;
      rec["mu0"] = pt.estimate->mu0_hat;
      rec["ad"] = pt.estimate->ad;
    } else {
      rec["absent"] = true;
    }
    grid.push_back(rec);
  }
  return json{{"type", "validation_curve"}, {"score_name", curve.score_name}, {"grid", grid}};
}

PropensityModel propensity_from_json(const json& j) {
  PropensityModel m;
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  m.clip_eps = j.at("clip_eps").get<double>();
  return m;
}

PoissonGlmModel poisson_glm_from_json(const json& j) {
  PoissonGlmModel m;
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  return m;
}

BoostedPoissonModel boosted_from_json(const json& j) {
  BoostedPoissonModel m;
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.cv_selected_trees = j.value("cv_selected_trees", -1);
  for (const auto& tj : j.at("trees")) {
    Tree t;
    tree_from_json(tj, t);
    m.trees.push_back(std::move(t));
  }
  return m;
}

ContrastFit contrast_fit_from_json(const json& j) {
  ContrastFit fit;
  fit.delta = j.at("delta").get<std::vector<double>>();
  fit.covariance = j.at("covariance").get<std::vector<double>>();
  fit.symmetric = j.value("symmetric", true);
  fit.partition_replicates = j.value("partition_replicates", 1);
  return fit;
}

TwoRegressionFit two_regression_from_json(const json& j) {
  TwoRegressionFit fit;
  fit.beta0 = j.at("beta0").get<std::vector<double>>();
  fit.beta1 = j.at("beta1").get<std::vector<double>>();
  return fit;
}

json provenance(const json& config, std::uint64_t seed) {
  const std::string dump = config.dump();
  return json{{"version", kVersion},
              {"seed", seed},
              {"config_hash", std::hash<std::string>{}(dump)}};
}

}  // namespace ratecate
