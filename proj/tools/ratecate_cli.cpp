// Command-line front end: fit CATE scores on count or survival data,
// validate scores on an independent sample, run the simulation studies, and
// exercise the population property checks.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ratecate/boosting.hpp"
#include "ratecate/contrast.hpp"
#include "ratecate/dataset.hpp"
#include "ratecate/json_io.hpp"
#include "ratecate/kernels.hpp"
#include "ratecate/sim.hpp"
#include "ratecate/survival.hpp"
#include "ratecate/tworeg.hpp"
#include "ratecate/util.hpp"
#include "ratecate/validate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ratecate;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOpts {
  std::string input;
  std::string out = ".";
  std::string schema_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool survival = false;
  double tau = 0.0;
};

CsvSchema load_schema(const std::string& path) {
  CsvSchema s;
  if (path.empty()) return s;
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open schema file: " + path);
  json j;
  in >> j;
  s.y = j.value("y", s.y);
  s.r = j.value("r", s.r);
  s.exposure = j.value("f", s.exposure);
  s.time = j.value("time", s.time);
  s.status = j.value("status", s.status);
  if (j.contains("z")) {
    if (j["z"].is_array()) {
      s.z_columns = j["z"].get<std::vector<std::string>>();
    } else {
      s.z_prefix = j["z"].get<std::string>();
    }
  }
  return s;
}

std::string provenance_comment(const json& config, std::uint64_t seed) {
  const auto p = provenance(config, seed);
  std::ostringstream os;
  os << "# ratecate " << kVersion << " seed=" << seed
     << " config_hash=" << p.at("config_hash").get<std::size_t>();
  return os.str();
}

void write_json_artifact(const fs::path& path, json j, const json& config,
                         std::uint64_t seed) {
  j["provenance"] = provenance(config, seed);
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string sparkline(const std::vector<double>& v) {
  static const char* levels = " .:-=+*#%@";
  double lo = 1e300, hi = -1e300;
  for (const double x : v) {
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  std::string s;
  for (const double x : v) {
    if (!std::isfinite(x)) {
      s += '?';
      continue;
    }
    const double t = hi > lo ? (x - lo) / (hi - lo) : 0.5;
    s += levels[static_cast<int>(t * 9.0 + 0.5)];
  }
  return s;
}

ObservationalDataset load_and_prepare(const CommonOpts& c) {
  auto ds = load_csv(c.input, load_schema(c.schema_path));
  if (c.survival) {
    if (!ds.survival) {
      throw std::invalid_argument("--survival requires time/status columns in the input");
    }
    if (!(c.tau > 0.0)) throw std::invalid_argument("--survival requires --tau > 0");
  } else if (ds.exposure) {
    ds = normalize_exposure(ds);
  }
  return ds;
}

// ---------------------------------------------------------------------------

struct FitOpts : CommonOpts {
  std::vector<std::string> methods = {"contrast"};
  std::string learner = "boost";
  std::size_t folds = 7;
  int partition_replicates = 3;
  bool symmetric = true;
  bool save_models = false;
};

int cmd_fit(const FitOpts& o) {
  const json config{{"command", "fit"},      {"input", o.input},
                    {"methods", o.methods},  {"learner", o.learner},
                    {"folds", o.folds},      {"partition_replicates", o.partition_replicates},
                    {"symmetric", o.symmetric}, {"survival", o.survival},
                    {"tau", o.tau},          {"seed", o.seed}};
  fs::create_directories(o.out);
  const auto ds = load_and_prepare(o);

  NuisanceConfig ncfg;
  ncfg.learner = o.learner == "glm" ? OutcomeLearner::glm : OutcomeLearner::boosted;
  ncfg.boost.seed = o.seed;

  json fits;
  std::vector<std::pair<std::string, std::vector<double>>> log_scores;
  std::vector<std::string> weight_cols;
  std::vector<std::vector<double>> weight_vals;
  std::vector<double> weight_se;  // contrast only

  auto add_linear = [&](const std::string& name, const std::vector<double>& delta) {
    log_scores.emplace_back(name, predict_log_cate(delta, ds.z, ds.n, ds.d));
    weight_cols.push_back(name);
    weight_vals.push_back(delta);
  };

  std::optional<NuisanceBundle> bundle;
  std::optional<RmtlWorkspace> work;
  RmtlConfig rcfg;
  if (o.survival) {
    rcfg.tau = o.tau;
    rcfg.folds = o.folds;
    rcfg.replicates = o.partition_replicates;
    rcfg.seed = o.seed;
    rcfg.symmetric = o.symmetric;
  }
  auto need_bundle = [&] {
    if (o.survival) {
      if (!work) {
        const auto plan = make_folds(ds.n, o.folds, ds.r, derive_seed(o.seed, Stream::replicate, 0));
        work = fit_rmtl_nuisances(ds, plan, rcfg);
      }
    } else if (!bundle) {
      const auto plan = make_folds(ds.n, o.folds, ds.r, derive_seed(o.seed, Stream::replicate, 0));
      bundle = fit_nuisance_bundle(ds, plan, ncfg);
    }
  };

  for (const auto& mname : o.methods) {
    const Method m = method_from_string(mname);
    switch (m) {
      case Method::contrast: {
        ContrastFit fit;
        if (o.survival) {
          fit = fit_rmtl_contrast(ds, rcfg);
        } else {
          ContrastConfig ccfg;
          ccfg.symmetric = o.symmetric;
          ccfg.folds = o.folds;
          ccfg.replicates = o.partition_replicates;
          ccfg.seed = o.seed;
          fit = fit_contrast(ds, ncfg, ccfg);
        }
        if (!fit.solver_report.converged) {
          throw std::runtime_error("contrast solver non-convergence: " +
                                   fit.solver_report.note);
        }
        fits["contrast"] = to_json(fit);
        add_linear("contrast", fit.delta);
        weight_se = fit.standard_errors();
        break;
      }
      case Method::tworeg: {
        need_bundle();
        std::vector<double> delta;
        if (o.survival) {
          const auto fit = fit_rmtl_two_regression(ds, *work, rcfg);
          delta.resize(fit.beta1.size());
          for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = fit.beta1[j] - fit.beta0[j];
          fits["tworeg"] = json{{"beta0", fit.beta0}, {"beta1", fit.beta1},
                                {"delta_implied", delta}};
        } else {
          const auto fit = fit_two_regression(ds, *bundle);
          fits["tworeg"] = to_json(fit);
          delta = fit.delta_implied();
        }
        add_linear("tworeg", delta);
        break;
      }
      case Method::naive: {
        std::vector<double> delta;
        if (o.survival) {
          const auto fit = fit_rmtl_naive(ds, o.tau);
          delta.resize(fit.beta1.size());
          for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = fit.beta1[j] - fit.beta0[j];
          fits["naive"] = json{{"beta0", fit.beta0}, {"beta1", fit.beta1},
                               {"delta_implied", delta}};
        } else {
          const auto fit = fit_naive(ds);
          fits["naive"] = to_json(fit);
          delta = fit.delta_implied();
        }
        add_linear("naive", delta);
        break;
      }
      case Method::boost: {
        BoostConfig bcfg = ncfg.boost;
        if (!bcfg.n_trees) bcfg.n_trees = 100;
        std::vector<double> w0, w1;
        ObservationalDataset flat = ds;
        if (o.survival) {
          const auto cm = fit_censoring_km(ds);
          w0.assign(ds.n, 0.0);
          w1.assign(ds.n, 0.0);
          for (std::size_t i = 0; i < ds.n; ++i) {
            const double x = ds.survival->time[i];
            const bool obs = ds.survival->status[i] == 1 || x >= o.tau;
            flat.y[i] = obs ? o.tau - std::min(x, o.tau) : 0.0;
            (ds.r[i] == 1 ? w1[i] : w0[i]) =
                ipcw_weight(x, ds.survival->status[i], cm.for_arm(ds.r[i]), o.tau);
          }
        }
        std::vector<std::size_t> rows[2];
        for (std::size_t i = 0; i < ds.n; ++i) rows[ds.r[i]].push_back(i);
        std::vector<double> score(ds.n, 0.0);
        json boost_json;
        for (int arm = 0; arm < 2; ++arm) {
          std::vector<double> za(rows[arm].size() * ds.d), ya(rows[arm].size()), wa;
          const auto& wsel = arm == 1 ? w1 : w0;
          if (!wsel.empty()) wa.resize(rows[arm].size());
          for (std::size_t a = 0; a < rows[arm].size(); ++a) {
            const std::size_t i = rows[arm][a];
            std::copy_n(&flat.z[i * ds.d], ds.d, &za[a * ds.d]);
            ya[a] = flat.y[i];
            if (!wsel.empty()) wa[a] = wsel[i];
          }
          const auto model = fit_boosted_poisson(za, rows[arm].size(), ds.d, ya, wa, bcfg);
          std::vector<double> pred;
          model.predict(flat.z, ds.n, ds.d, pred);
          for (std::size_t i = 0; i < ds.n; ++i) {
            const double p = std::clamp(pred[i], 1e-3, 1e3);
            score[i] += (arm == 1 ? 1.0 : -1.0) * std::log(p);
          }
          if (o.save_models) boost_json[arm == 1 ? "arm1" : "arm0"] = to_json(model);
        }
        if (o.save_models) fits["boost"] = boost_json;
        log_scores.emplace_back("boost", score);
        break;
      }
    }
  }

  if (o.save_models && bundle) {
    json folds = json::array();
    for (const auto& fm : bundle->per_fold) {
      json fj;
      fj["pi1"] = to_json(fm.pi1);
      std::visit([&](const auto& m) { fj["mu0"] = to_json(m); }, fm.mu0.model);
      std::visit([&](const auto& m) { fj["mu1"] = to_json(m); }, fm.mu1.model);
      folds.push_back(fj);
    }
    fits["nuisance_models"] = folds;
  }

  write_json_artifact(fs::path(o.out) / "fit.json", json{{"fits", fits}}, config, o.seed);

  {
    std::ofstream out(fs::path(o.out) / "scores.csv");
    out << provenance_comment(config, o.seed) << '\n';
    out << "row";
    for (const auto& [name, s] : log_scores) out << ',' << name << "_log_score";
    out << '\n';
    for (std::size_t i = 0; i < ds.n; ++i) {
      out << i;
      for (const auto& [name, s] : log_scores) out << ',' << format_double(s[i]);
      out << '\n';
    }
  }

  {
    std::ofstream out(fs::path(o.out) / "weights.txt");
    out << "estimated weights of the log-transformed CATE scores\n\n";
    out << "covariate      ";
    for (const auto& name : weight_cols) out << '\t' << name;
    out << '\n';
    const std::size_t p = ds.d + 1;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == 0) {
        out << "intercept      ";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "z%-13zu", j);
        out << buf;
      }
      for (std::size_t c = 0; c < weight_cols.size(); ++c) {
        char buf[64];
        if (weight_cols[c] == "contrast" && !weight_se.empty()) {
          std::snprintf(buf, sizeof buf, "\t%8.3f (%.3f)", weight_vals[c][j], weight_se[j]);
        } else {
          std::snprintf(buf, sizeof buf, "\t%8.3f", weight_vals[c][j]);
        }
        out << buf;
      }
      out << '\n';
    }
  }
  std::cout << "fit: wrote " << (fs::path(o.out) / "fit.json").string() << ", scores.csv, "
            << "weights.txt (n=" << ds.n << ", d=" << ds.d << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ValidateOpts : CommonOpts {
  std::string scores_path;
  std::string score_method = "contrast";
  std::string score_column;  // read scores from the input csv instead
  std::string q_grid = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
  std::string oracle_setting;
  std::size_t oracle_draws = 1000000;
  std::string learner = "glm";
};

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> g;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) g.push_back(std::stod(tok));
  return g;
}

std::vector<double> read_scores_csv(const std::string& path, const std::string& method,
                                    std::size_t expect_n) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scores file: " + path);
  std::string line;
  while (std::getline(in, line) && (line.empty() || line[0] == '#')) {
  }
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  const std::string want = method + "_log_score";
  std::size_t col = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == want) col = j;
  }
  if (col == header.size()) {
    throw std::invalid_argument("scores file lacks column '" + want + "'");
  }
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string tok;
    for (std::size_t j = 0; j <= col; ++j) std::getline(ss, tok, ',');
    out.push_back(std::stod(tok));
  }
  if (out.size() != expect_n) {
    throw std::invalid_argument("scores file has " + std::to_string(out.size()) +
                                " rows, dataset has " + std::to_string(expect_n));
  }
  return out;
}

int cmd_validate(const ValidateOpts& o) {
  const json config{{"command", "validate"}, {"input", o.input},
                    {"scores", o.scores_path}, {"score_method", o.score_method},
                    {"q_grid", o.q_grid},      {"survival", o.survival},
                    {"tau", o.tau},            {"oracle", o.oracle_setting},
                    {"seed", o.seed}};
  fs::create_directories(o.out);
  const auto ds = load_and_prepare(o);

  std::vector<double> scores;
  if (!o.score_column.empty()) {
    CsvSchema sc = load_schema(o.schema_path);
    sc.y = o.score_column;  // reuse the numeric column reader
    const auto tmp = load_csv(o.input, sc);
    scores = tmp.y;
  } else {
    scores = read_scores_csv(o.scores_path, o.score_method, ds.n);
  }

  const auto q_grid = parse_grid(o.q_grid);
  AdConfig acfg;
  acfg.learner = o.learner == "boost" ? OutcomeLearner::boosted : OutcomeLearner::glm;

  ValidationCurve curve = o.survival
                              ? rmtl_validation_curve(ds, scores, o.tau, q_grid, acfg)
                              : validation_curve(ds, scores, q_grid, acfg);
  curve.score_name = o.score_method;

  std::vector<double> oracle_ad;
  if (!o.oracle_setting.empty()) {
    const auto spec = DgpSpec::get(dgp_from_string(o.oracle_setting));
    const auto oracle = make_oracle_points(spec, o.oracle_draws, 1, o.tau > 0 ? o.tau : 0.75);
    std::vector<double> true_scores(oracle.m);
    for (std::size_t i = 0; i < oracle.m; ++i) {
      true_scores[i] = oracle.mu1[i] / oracle.mu0[i];
    }
    oracle_ad = population_ad_curve(oracle, true_scores, q_grid);
  }

  {
    std::ofstream out(fs::path(o.out) / "curve.csv");
    out << provenance_comment(config, o.seed) << '\n';
    out << "q,threshold,m_c,mu1,mu0,ad";
    if (!oracle_ad.empty()) out << ",oracle_ad";
    out << '\n';
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
      const auto& pt = curve.grid[i];
      out << pt.q << ',';
      if (std::isinf(pt.threshold)) {
        out << "-inf";
      } else {
        out << format_double(pt.threshold);
      }
      if (pt.estimate) {
        out << ',' << pt.estimate->m_c << ',' << format_double(pt.estimate->mu1_hat) << ','
            << format_double(pt.estimate->mu0_hat) << ',' << format_double(pt.estimate->ad);
      } else {
        out << ",,,,";
      }
      if (!oracle_ad.empty()) out << ',' << format_double(oracle_ad[i]);
      out << '\n';
    }
  }
  {
    // gnuplot-friendly table
    std::ofstream out(fs::path(o.out) / "curve.dat");
    out << provenance_comment(config, o.seed) << '\n';
    out << "# q ad\n";
    for (const auto& pt : curve.grid) {
      if (pt.estimate) out << pt.q << ' ' << pt.estimate->ad << '\n';
    }
  }
  write_json_artifact(fs::path(o.out) / "curve.json", to_json(curve), config, o.seed);

  // median split: subgroup ATEs in the top and bottom halves
  json split;
  try {
    const double c = quantile_threshold(scores, 0.5);
    std::vector<std::size_t> top, bottom;
    for (std::size_t i = 0; i < ds.n; ++i) {
      (scores[i] >= c ? top : bottom).push_back(i);
    }
    auto half_ad = [&](const std::vector<std::size_t>& rows) -> json {
      ObservationalDataset sub;
      sub.n = rows.size();
      sub.d = ds.d;
      sub.y.resize(rows.size());
      sub.r.resize(rows.size());
      sub.z.resize(rows.size() * ds.d);
      if (ds.survival) sub.survival.emplace();
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const std::size_t i = rows[a];
        sub.y[a] = ds.y[i];
        sub.r[a] = ds.r[i];
        std::copy_n(&ds.z[i * ds.d], ds.d, &sub.z[a * ds.d]);
        if (ds.survival) {
          sub.survival->time.push_back(ds.survival->time[i]);
          sub.survival->status.push_back(ds.survival->status[i]);
        }
      }
      std::vector<double> ones(rows.size(), 1.0);
      const auto est = o.survival
                           ? rmtl_validation_curve(sub, ones, o.tau, {1.0}, acfg).grid[0].estimate
                           : validation_curve(sub, ones, {1.0}, acfg).grid[0].estimate;
      if (!est) return json{{"absent", true}};
      return json{{"m", est->m_c}, {"mu1", est->mu1_hat}, {"mu0", est->mu0_hat},
                  {"ad", est->ad}};
    };
    split = json{{"top_half", half_ad(top)}, {"bottom_half", half_ad(bottom)}};
  } catch (const std::exception& e) {
    split = json{{"error", e.what()}};
  }
  write_json_artifact(fs::path(o.out) / "split_summary.json", split, config, o.seed);

  std::vector<double> ads;
  for (const auto& pt : curve.grid) {
    ads.push_back(pt.estimate ? pt.estimate->ad : std::numeric_limits<double>::quiet_NaN());
  }
  std::cout << "validation curve (q " << q_grid.front() << ".." << q_grid.back()
            << "): [" << sparkline(ads) << "]\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    std::cout << "  q=" << q_grid[i] << "  ad=";
    if (curve.grid[i].estimate) {
      std::cout << curve.grid[i].estimate->ad;
    } else {
      std::cout << "absent";
    }
    if (!oracle_ad.empty()) std::cout << "  oracle=" << oracle_ad[i];
    std::cout << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateOpts : CommonOpts {
  std::string setting = "setting2_poisson";
  std::size_t n = 5000;
  int replicates = 50;
  std::vector<std::string> methods = {"contrast", "tworeg", "naive", "boost"};
  std::size_t folds = 2;
  int partition_replicates = 1;
  std::string learner = "boost";
  std::size_t oracle_draws = 200000;
  bool no_curves = false;
  double tau = 0.75;
};

int cmd_simulate(const SimulateOpts& o) {
  const json config{{"command", "simulate"}, {"setting", o.setting}, {"n", o.n},
                    {"replicates", o.replicates}, {"methods", o.methods},
                    {"folds", o.folds}, {"seed", o.seed}, {"jobs", o.jobs}};
  fs::create_directories(o.out);

  if (o.setting == "toy_confounding") {
    const auto rep = toy_confounding_check(o.n, o.seed);
    json j{{"naive_beta1", rep.naive_beta1},
           {"naive_beta0", rep.naive_beta0},
           {"naive_slope_diff", rep.naive_slope_diff},
           {"contrast_delta", rep.contrast_delta},
           {"tworeg_delta", rep.tworeg_delta}};
    write_json_artifact(fs::path(o.out) / "toy.json", j, config, o.seed);
    std::cout << "toy confounding example (n=" << o.n << "):\n"
              << "  naive beta1 = (" << rep.naive_beta1[0] << ", " << rep.naive_beta1[1]
              << ")\n"
              << "  naive beta0 = (" << rep.naive_beta0[0] << ", " << rep.naive_beta0[1]
              << ")\n"
              << "  naive implied slope = " << rep.naive_slope_diff << '\n'
              << "  contrast slope = " << rep.contrast_delta[1] << '\n'
              << "  tworeg slope = " << rep.tworeg_delta[1] << '\n';
    return 0;
  }

  const auto spec = DgpSpec::get(dgp_from_string(o.setting));
  std::vector<Method> methods;
  for (const auto& m : o.methods) methods.push_back(method_from_string(m));

  StudyConfig scfg;
  scfg.n = o.n;
  scfg.replicates = o.replicates;
  scfg.seed = o.seed;
  scfg.jobs = o.jobs;
  scfg.folds = o.folds;
  scfg.partition_replicates = o.partition_replicates;
  scfg.nuisance.learner = o.learner == "glm" ? OutcomeLearner::glm : OutcomeLearner::boosted;
  scfg.oracle_draws = o.oracle_draws;
  scfg.with_curves = !o.no_curves;
  scfg.tau = o.tau;

  const auto result = run_study(spec, methods, scfg);

  {
    std::ofstream out(fs::path(o.out) / "correlations.csv");
    out << provenance_comment(config, o.seed) << '\n';
    out << "method,replicates_ok,pearson_q25,pearson_median,pearson_q75,spearman_median\n";
    for (const Method m : methods) {
      auto agg = result.per_method.at(m);
      auto q = [&](std::vector<double> v, double p) {
        std::sort(v.begin(), v.end());
        if (v.empty()) return 0.0;
        const double idx = p * (v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (idx - lo) * (v[hi] - v[lo]);
      };
      out << method_to_string(m) << ',' << agg.pearson.size() << ','
          << q(agg.pearson, 0.25) << ',' << median(agg.pearson) << ','
          << q(agg.pearson, 0.75) << ',' << median(agg.spearman) << '\n';
    }
  }
  if (!result.delta0.empty() &&
      std::count(methods.begin(), methods.end(), Method::contrast)) {
    std::ofstream out(fs::path(o.out) / "bias_coverage.csv");
    out << provenance_comment(config, o.seed) << '\n';
    out << "coordinate,true_value,bias,coverage\n";
    const auto b = result.bias();
    const auto c = result.coverage();
    for (std::size_t j = 0; j < result.delta0.size(); ++j) {
      out << (j == 0 ? std::string("intercept") : "z" + std::to_string(j)) << ','
          << result.delta0[j] << ',' << b[j] << ',' << c[j] << '\n';
    }
  }
  if (scfg.with_curves) {
    for (const Method m : methods) {
      const auto& agg = result.per_method.at(m);
      std::ofstream out(fs::path(o.out) /
                        ("curve_" + method_to_string(m) + ".csv"));
      out << provenance_comment(config, o.seed) << '\n';
      out << "q,median_true_ad\n";
      for (std::size_t qi = 0; qi < result.q_grid.size(); ++qi) {
        std::vector<double> col;
        for (const auto& cur : agg.true_curve) col.push_back(cur[qi]);
        out << result.q_grid[qi] << ',' << median(col) << '\n';
      }
    }
  }
  json summary{{"setting", o.setting},
               {"replicates_requested", o.replicates},
               {"failures", result.failures},
               {"failure_notes", result.failure_notes}};
  for (const Method m : methods) {
    summary["median_pearson"][method_to_string(m)] =
        median(result.per_method.at(m).pearson);
  }
  write_json_artifact(fs::path(o.out) / "summary.json", summary, config, o.seed);

  std::cout << "study " << o.setting << " (n=" << o.n << ", " << o.replicates
            << " replicates, " << result.failures << " failures)\n";
  for (const Method m : methods) {
    std::cout << "  median pearson(" << method_to_string(m)
              << ") = " << median(result.per_method.at(m).pearson) << '\n';
  }
  if (!result.delta0.empty() && !result.contrast_error.empty()) {
    const auto b = result.bias();
    const auto c = result.coverage();
    double bmax = 0.0, clo = 1.0, chi = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      bmax = std::max(bmax, std::abs(b[j]));
      clo = std::min(clo, c[j]);
      chi = std::max(chi, c[j]);
    }
    std::cout << "  contrast: max|bias|=" << bmax << "  coverage in [" << clo << ", " << chi
              << "]\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct CheckOpts : CommonOpts {
  int theorem2_instances = 100;
  int orthogonality_directions = 20;
  std::size_t hr_n = 100000;
};

int cmd_check(const CheckOpts& o) {
  int failures = 0;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << '\n';
    if (!pass) ++failures;
  };

  {
    auto rng = make_rng(o.seed, Stream::dgp, 7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    bool all_ok = true;
    for (int inst = 0; inst < o.theorem2_instances; ++inst) {
      const std::size_t m = 10;
      DiscreteDgp dgp;
      double tot = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        dgp.prob.push_back(0.05 + unif(rng));
        tot += dgp.prob.back();
        dgp.mu0.push_back(std::exp(2.0 * unif(rng) - 1.0));
        dgp.mu1.push_back(dgp.mu0.back() * std::exp(2.0 * unif(rng) - 1.0));
      }
      for (auto& p : dgp.prob) p /= tot;
      std::vector<double> grid;
      for (int g = 0; g <= 20; ++g) grid.push_back(0.2 + 0.15 * g);
      const auto rep = check_theorem2(dgp, grid);
      if (!rep.monotone || !rep.ad_ge_c) all_ok = false;
    }
    report("theorem2: AD(c) monotone and AD(c) >= c on random discrete laws", all_ok,
           std::to_string(o.theorem2_instances) + " instances");
  }
  {
    const auto rep = or_counterexample();
    const bool ok = std::abs(rep.top_by_conditional - 1.14) <= 0.01 &&
                    std::abs(rep.best_subgroup - 1.66) <= 0.01;
    std::ostringstream os;
    os << "top-by-conditional OR=" << rep.top_by_conditional
       << ", best subgroup OR=" << rep.best_subgroup;
    report("odds-ratio counterexample: monotonicity fails for OR", ok, os.str());
  }
  {
    // orthogonality on a random 3-point instance
    auto rng = make_rng(o.seed, Stream::dgp, 11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    DiscreteInstance inst;
    inst.prob = {0.3, 0.4, 0.3};
    inst.z = {{-1.0}, {0.0}, {1.0}};
    inst.mu0 = {0.8, 1.0, 1.3};
    inst.pi1 = {0.4, 0.5, 0.6};
    inst.delta0 = {0.2, 0.3};
    int zero_ok = 0, far_ok = 0;
    for (int dir = 0; dir < o.orthogonality_directions; ++dir) {
      std::vector<double> dmu(3), dpi(3);
      for (int j = 0; j < 3; ++j) {
        dmu[j] = 0.5 + unif(rng);
        dpi[j] = (unif(rng) < 0.5 ? -1 : 1) * (0.05 + 0.1 * unif(rng));
      }
      if (orthogonality_check(inst, dmu, dpi, 0.0) <= 1e-6) ++zero_ok;
      if (orthogonality_check(inst, dmu, dpi, 0.5) > 1e-3) ++far_ok;
    }
    std::ostringstream os;
    os << zero_ok << "/" << o.orthogonality_directions << " zero at r=0, " << far_ok
       << " live at r=0.5";
    report("neyman orthogonality: derivative vanishes at r=0 only",
           zero_ok == o.orthogonality_directions &&
               far_ok >= (3 * o.orthogonality_directions) / 4,
           os.str());
  }
  {
    const auto rep = check_spurious_hr(o.hr_n, o.seed);
    const bool ok = std::abs(rep.beta1 + 1.85) <= 0.1 && std::abs(rep.beta0 + 1.55) <= 0.1;
    std::ostringstream os;
    os << "beta1=" << rep.beta1 << ", beta0=" << rep.beta0;
    report("spurious hazard-ratio heterogeneity limits", ok, os.str());
  }
  {
    for (const auto name : {DgpName::surv1, DgpName::surv2}) {
      const auto spec = DgpSpec::get(name);
      const auto gen = generate(spec, 100000, o.seed);
      double censored = 0.0;
      for (const int s : *&gen.ds.survival->status) censored += s == 0 ? 1.0 : 0.0;
      censored /= gen.ds.n;
      std::ostringstream os;
      os << "empirical censoring rate " << censored;
      report("censoring rate vs stated 83% (" + dgp_to_string(name) + ")",
             std::abs(censored - 0.83) <= 0.02, os.str());
    }
  }
  std::cout << (failures == 0 ? "all checks passed\n"
                              : std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ratio-based CATE estimation and validation"};
  app.set_version_flag("--version", kVersion);

  // --config JSON applies defaults; explicit flags override.
  std::string config_path;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  }
  json cfgj;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << json{{"error", "cannot open config " + config_path}, {"exit_code", 2}}
                << '\n';
      return 2;
    }
    in >> cfgj;
  }
  auto jget = [&](const char* key, auto fallback) {
    using T = decltype(fallback);
    return cfgj.contains(key) ? cfgj.at(key).get<T>() : fallback;
  };

  FitOpts fo;
  ValidateOpts vo;
  SimulateOpts so;
  CheckOpts ko;
  SimulateOpts to_;  // toy shares simulate options

  auto add_common = [&](CLI::App* cmd, CommonOpts& c, bool needs_input) {
    cmd->add_option("--config", config_path, "JSON config file mirroring the flags");
    auto* in = cmd->add_option("--input", c.input, "input CSV");
    if (needs_input) in->required();
    cmd->add_option("--schema", c.schema_path, "JSON column-name mapping");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--seed", c.seed, "root seed; all randomness derives from it");
    cmd->add_option("--jobs", c.jobs, "worker threads");
    cmd->add_flag("--survival", c.survival, "time-to-event outcome mode");
    cmd->add_option("--tau", c.tau, "RMTL truncation time (survival mode)");
  };

  auto* fit = app.add_subcommand("fit", "fit CATE scores on a training sample");
  fo.seed = jget("seed", std::uint64_t{0});
  fo.folds = jget("folds", std::size_t{7});
  fo.partition_replicates = jget("partition_replicates", 3);
  fo.learner = jget("learner", std::string("boost"));
  add_common(fit, fo, true);
  fit->add_option("--method", fo.methods, "methods: contrast tworeg naive boost")
      ->delimiter(',');
  fit->add_option("--learner", fo.learner, "outcome learner: glm | boost");
  fit->add_option("--folds", fo.folds, "cross-fitting folds K");
  fit->add_option("--partition-replicates", fo.partition_replicates,
                  "independent partition replicates (delta averaged)");
  fit->add_flag("--symmetric,!--no-symmetric", fo.symmetric,
                "use the averaged symmetric estimating equation (default on)");
  fit->add_flag("--save-models", fo.save_models, "embed nuisance models in fit.json");

  auto* val = app.add_subcommand("validate", "validation curve on an independent sample");
  add_common(val, vo, true);
  val->add_option("--scores", vo.scores_path, "scores.csv from `fit`");
  val->add_option("--score-method", vo.score_method, "score column to validate");
  val->add_option("--score-column", vo.score_column, "read scores from this input column");
  val->add_option("--q-grid", vo.q_grid, "comma-separated q grid");
  val->add_option("--oracle", vo.oracle_setting,
                  "simulation setting name: adds the population oracle column");
  val->add_option("--oracle-draws", vo.oracle_draws, "quasi-random draws for the oracle");
  val->add_option("--learner", vo.learner, "subgroup outcome learner: glm | boost");

  auto* sim = app.add_subcommand("simulate", "run a simulation study");
  so.seed = jget("seed", std::uint64_t{0});
  so.n = jget("n", std::size_t{5000});
  so.replicates = jget("replicates", 50);
  add_common(sim, so, false);
  sim->add_option("--setting", so.setting, "DGP name (see --help-settings)");
  sim->add_option("--n", so.n, "sample size per replicate");
  sim->add_option("--replicates", so.replicates, "number of replicates");
  sim->add_option("--method", so.methods, "methods to compare")->delimiter(',');
  sim->add_option("--folds", so.folds, "cross-fitting folds");
  sim->add_option("--partition-replicates", so.partition_replicates,
                  "partition replicates per fit");
  sim->add_option("--learner", so.learner, "outcome learner: glm | boost");
  sim->add_option("--oracle-draws", so.oracle_draws, "oracle covariate draws");
  sim->add_flag("--no-curves", so.no_curves, "skip population validation curves");
  sim->add_option("--tau", so.tau, "RMTL truncation (survival settings)");

  auto* toy = app.add_subcommand("toy", "univariate confounding example");
  to_.setting = "toy_confounding";
  to_.n = 100000;
  add_common(toy, to_, false);
  toy->add_option("--n", to_.n, "sample size");

  auto* chk = app.add_subcommand("check", "population property checks");
  add_common(chk, ko, false);
  chk->add_option("--instances", ko.theorem2_instances, "random discrete laws to test");
  chk->add_option("--directions", ko.orthogonality_directions, "perturbation directions");
  chk->add_option("--hr-n", ko.hr_n, "sample size for the hazard-ratio example");

  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
    if (*fit) return cmd_fit(fo);
    if (*val) return cmd_validate(vo);
    if (*sim) return cmd_simulate(so);
    if (*toy) return cmd_simulate(to_);
    if (*chk) return cmd_check(ko);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::invalid_argument& e) {
    std::cerr << json{{"error", e.what()}, {"exit_code", 2}}.dump() << '\n';
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << json{{"error", e.what()}, {"exit_code", 3}}.dump() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"exit_code", 4}}.dump() << '\n';
    return 4;
  }
  return 0;
}
