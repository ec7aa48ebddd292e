#include "ratecate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ratecate/kernels.hpp"
#include "ratecate/util.hpp"

namespace ratecate {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    fail("non-numeric value '" + cell + "' in column '" + col + "' at data row " +
         std::to_string(row + 1));
  }
}

}  // namespace

std::size_t ObservationalDataset::treated_count() const {
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), 1));
}

void ObservationalDataset::validate() const {
  if (n == 0) fail("dataset is empty");
  if (y.size() != n || r.size() != n || z.size() != n * d) {
    fail("dataset field lengths inconsistent with n/d");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i])) fail("non-finite outcome at row " + std::to_string(i + 1));
    if (y[i] < 0.0) fail("negative outcome at row " + std::to_string(i + 1));
    if (r[i] != 0 && r[i] != 1) {
      fail("treatment indicator not in {0,1} at row " + std::to_string(i + 1));
    }
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) {
      fail("non-finite covariate at row " + std::to_string(i / d + 1) + ", column z" +
           std::to_string(i % d + 1));
    }
  }
  const std::size_t n1 = treated_count();
  if (n1 == 0) fail("treated arm is empty");
  if (n1 == n) fail("control arm is empty");
  if (exposure) {
    if (exposure->size() != n) fail("exposure length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      if (!((*exposure)[i] > 0.0) || !std::isfinite((*exposure)[i])) {
        fail("exposure must be positive and finite at row " + std::to_string(i + 1));
      }
    }
  }
  if (survival) {
    if (survival->time.size() != n || survival->status.size() != n) {
      fail("survival field length mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!(survival->time[i] >= 0.0) || !std::isfinite(survival->time[i])) {
        fail("observed time must be nonnegative at row " + std::to_string(i + 1));
      }
      if (survival->status[i] != 0 && survival->status[i] != 1) {
        fail("status not in {0,1} at row " + std::to_string(i + 1));
      }
    }
  }
}

DesignMatrix DesignMatrix::from_covariates(const std::vector<double>& z_rowmajor,
                                           std::size_t n, std::size_t d) {
  DesignMatrix X;
  X.n = n;
  X.p = d + 1;
  X.cols.assign(X.p, std::vector<double>(n));
  std::fill(X.cols[0].begin(), X.cols[0].end(), 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) X.cols[j + 1][i] = z_rowmajor[i * d + j];
  }
  return X;
}

DesignMatrix DesignMatrix::from_dataset(const ObservationalDataset& ds) {
  return from_covariates(ds.z, ds.n, ds.d);
}

void DesignMatrix::linear_predictor(const std::vector<double>& beta,
                                    std::vector<double>& eta) const {
  if (beta.size() != p) throw std::invalid_argument("coefficient length mismatch");
  eta.assign(n, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    if (beta[j] != 0.0) kern::axpy(beta[j], col(j), eta.data(), n);
  }
}

DesignMatrix DesignMatrix::subset(const std::vector<std::size_t>& rows) const {
  DesignMatrix X;
  X.n = rows.size();
  X.p = p;
  X.cols.assign(p, std::vector<double>(X.n));
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) X.cols[j][i] = cols[j][rows[i]];
  }
  return X;
}

ObservationalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) fail("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) fail("empty file: " + path);
  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t j = 0; j < header.size(); ++j) col_index[header[j]] = j;

  auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = col_index.find(name);
    if (it == col_index.end()) return std::nullopt;
    return it->second;
  };
  auto require_col = [&](const std::string& name) {
    auto idx = find_col(name);
    if (!idx) fail("missing required column '" + name + "' in " + path);
    return *idx;
  };

  const std::size_t yc = require_col(schema.y);
  const std::size_t rc = require_col(schema.r);

  std::vector<std::string> znames = schema.z_columns;
  if (znames.empty()) {
    for (std::size_t j = 1;; ++j) {
      const std::string name = schema.z_prefix + std::to_string(j);
      if (!find_col(name)) break;
      znames.push_back(name);
    }
  }
  if (znames.empty()) fail("no covariate columns found (prefix '" + schema.z_prefix + "')");
  std::vector<std::size_t> zcs;
  for (const auto& name : znames) zcs.push_back(require_col(name));

  const auto fc = find_col(schema.exposure);
  const auto tc = find_col(schema.time);
  const auto sc = find_col(schema.status);
  if (tc.has_value() != sc.has_value()) {
    fail("survival data needs both '" + schema.time + "' and '" + schema.status + "' columns");
  }

  ObservationalDataset ds;
  ds.d = zcs.size();
  if (fc) ds.exposure.emplace();
  if (tc) {
    ds.survival.emplace();
    ds.mode = OutcomeMode::survival;
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail("row " + std::to_string(row + 1) + " has " + std::to_string(cells.size()) +
           " cells, expected " + std::to_string(header.size()));
    }
    for (const auto& c : cells) {
      if (c.empty()) {
        fail("missing value at data row " + std::to_string(row + 1) + " (rows with missing "
             "required fields are rejected, not imputed)");
      }
    }
    ds.y.push_back(parse_cell(cells[yc], row, schema.y));
    const double rv = parse_cell(cells[rc], row, schema.r);
    if (rv != 0.0 && rv != 1.0) {
      fail("treatment column '" + schema.r + "' has value '" + cells[rc] + "' at data row " +
           std::to_string(row + 1) + "; expected 0 or 1");
    }
    ds.r.push_back(static_cast<int>(rv));
    for (std::size_t j = 0; j < zcs.size(); ++j) {
      ds.z.push_back(parse_cell(cells[zcs[j]], row, znames[j]));
    }
    if (fc) ds.exposure->push_back(parse_cell(cells[*fc], row, schema.exposure));
    if (tc) {
      ds.survival->time.push_back(parse_cell(cells[*tc], row, schema.time));
      const double sv = parse_cell(cells[*sc], row, schema.status);
      if (sv != 0.0 && sv != 1.0) {
        fail("status column has value '" + cells[*sc] + "' at data row " +
             std::to_string(row + 1) + "; expected 0 or 1");
      }
      ds.survival->status.push_back(static_cast<int>(sv));
    }
    ++row;
  }
  ds.n = row;
  ds.validate();
  return ds;
}

void write_csv(const std::string& path, const ObservationalDataset& ds,
               const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) fail("cannot open file for writing: " + path);
  out << schema.y << ',' << schema.r;
  for (std::size_t j = 1; j <= ds.d; ++j) out << ',' << schema.z_prefix << j;
  if (ds.exposure) out << ',' << schema.exposure;
  if (ds.survival) out << ',' << schema.time << ',' << schema.status;
  out << '\n';
  for (std::size_t i = 0; i < ds.n; ++i) {
    out << format_double(ds.y[i]) << ',' << ds.r[i];
    for (std::size_t j = 0; j < ds.d; ++j) out << ',' << format_double(ds.zat(i, j));
    if (ds.exposure) out << ',' << format_double((*ds.exposure)[i]);
    if (ds.survival) out << ',' << format_double(ds.survival->time[i]) << ',' << ds.survival->status[i];
    out << '\n';
  }
}

ObservationalDataset normalize_exposure(const ObservationalDataset& ds) {
  if (!ds.exposure) fail("normalize_exposure: dataset has no exposure column");
  ObservationalDataset out = ds;
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (!((*ds.exposure)[i] > 0.0)) {
      fail("normalize_exposure: nonpositive exposure at row " + std::to_string(i + 1));
    }
    out.y[i] = ds.y[i] / (*ds.exposure)[i];
  }
  out.exposure.reset();
  return out;
}

std::vector<std::vector<std::size_t>> FoldPlan::fold_members() const {
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) folds[assignment[i]].push_back(i);
  return folds;
}

FoldPlan make_folds(std::size_t n, std::size_t k, const std::vector<int>& r,
                    std::uint64_t seed) {
  if (k < 2) fail("make_folds: k must be >= 2");
  if (n < 2 * k) fail("make_folds: need n >= 2k");
  if (r.size() != n) fail("make_folds: r length mismatch");
  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < n; ++i) (r[i] == 1 ? treated : control).push_back(i);
  if (treated.size() < k || control.size() < k) {
    fail("make_folds: k=" + std::to_string(k) + " too large for arm sizes (" +
         std::to_string(treated.size()) + " treated, " + std::to_string(control.size()) +
         " control); every fold needs both arms");
  }

  auto rng = make_rng(seed, Stream::folds);
  std::shuffle(treated.begin(), treated.end(), rng);
  std::shuffle(control.begin(), control.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(n, 0);
  // Round-robin within each arm; the control stream starts where the
  // treated remainder ended so total fold sizes differ by at most one.
  for (std::size_t idx = 0; idx < treated.size(); ++idx) {
    plan.assignment[treated[idx]] = idx % k;
  }
  const std::size_t offset = treated.size() % k;
  for (std::size_t idx = 0; idx < control.size(); ++idx) {
    plan.assignment[control[idx]] = (offset + idx) % k;
  }
  return plan;
}

}  // namespace ratecate
