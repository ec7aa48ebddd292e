#pragma once
// Dataset representation, CSV ingestion, exposure normalization and
// treatment-stratified fold plans.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ratecate {

struct SurvivalFields {
  std::vector<double> time;    // observed time X = min(T, C), >= 0
  std::vector<int> status;     // 1 = event, 0 = censored
};

enum class OutcomeMode { count, survival };

// One sample {G_i = (Y_i, R_i, Z_i)}, plus optional exposure and survival
// columns. Immutable after construction/validation; shared freely across
// threads.
struct ObservationalDataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> y;                  // nonnegative outcomes (length n)
  std::vector<int> r;                     // treatment indicator in {0,1}
  std::vector<double> z;                  // row-major n x d covariates
  std::optional<std::vector<double>> exposure;  // positive follow-up F
  std::optional<SurvivalFields> survival;
  OutcomeMode mode = OutcomeMode::count;

  double zat(std::size_t i, std::size_t j) const { return z[i * d + j]; }
  std::size_t treated_count() const;

  // Throws std::invalid_argument naming the first offending row/field.
  void validate() const;
};

// Column-major design matrix with leading intercept column: columns
// [1, z_1, ..., z_d]. This is the layout the kernels operate on.
struct DesignMatrix {
  std::size_t n = 0;
  std::size_t p = 0;                  // d + 1
  std::vector<std::vector<double>> cols;

  static DesignMatrix from_covariates(const std::vector<double>& z_rowmajor,
                                      std::size_t n, std::size_t d);
  static DesignMatrix from_dataset(const ObservationalDataset& ds);
  const double* col(std::size_t j) const { return cols[j].data(); }
  // Linear predictor eta = X beta, accumulated column-wise.
  void linear_predictor(const std::vector<double>& beta, std::vector<double>& eta) const;
  DesignMatrix subset(const std::vector<std::size_t>& rows) const;
};

// Maps dataset fields to CSV column names. z_prefix expands to z1..zd when
// z_columns is empty.
struct CsvSchema {
  std::string y = "y";
  std::string r = "r";
  std::vector<std::string> z_columns;   // explicit covariate columns
  std::string z_prefix = "z";           // used when z_columns empty
  std::string exposure = "f";           // optional
  std::string time = "time";            // optional (survival)
  std::string status = "status";        // optional (survival)
};

ObservationalDataset load_csv(const std::string& path, const CsvSchema& schema = {});
void write_csv(const std::string& path, const ObservationalDataset& ds,
               const CsvSchema& schema = {});

// y <- y / exposure; exposure cleared.
ObservationalDataset normalize_exposure(const ObservationalDataset& ds);

// Cross-fitting fold plan, stratified by treatment arm.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // fold index in [0, k) per row
  std::uint64_t seed = 0;

  std::vector<std::vector<std::size_t>> fold_members() const;
};

// Deterministic given seed. Requires k >= 2, n >= 2k and each arm to have at
// least k members so every fold sees both arms.
FoldPlan make_folds(std::size_t n, std::size_t k, const std::vector<int>& r,
                    std::uint64_t seed);

}  // namespace ratecate
