#include "balmatch/balance.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "balmatch/error.hpp"

namespace balmatch {

void BalanceSpec::add(BalanceConstraint c) {
  for (const auto& existing : constraints_)
    if (existing.label == c.label) throw Error(ErrorKind::BadConfig, "duplicate balance label '" + c.label + "'");
  if (!(c.tolerance >= 0.0) || !std::isfinite(c.tolerance))
    throw Error(ErrorKind::BadConfig, "tolerance of '" + c.label + "' must be finite and >= 0");
  if (!constraints_.empty() && (c.treated_values.size() != constraints_.front().treated_values.size() ||
                                c.control_values.size() != constraints_.front().control_values.size()))
    throw Error(ErrorKind::BadConfig, "constraint '" + c.label + "' is sized for different data");
  constraints_.push_back(std::move(c));
}

void BalanceSpec::add(std::vector<BalanceConstraint> cs) {
  for (auto& c : cs) add(std::move(c));
}

namespace {

const ColumnSpec& require_kind(const StudyData& data, const std::string& column, ColumnKind kind) {
  const ColumnSpec& col = data.column(column);
  if (col.kind != kind) {
    if (kind == ColumnKind::Categorical) throw Error(ErrorKind::NotCategorical, "column '" + column + "'");
    throw Error(ErrorKind::NotNumeric, "column '" + column + "'");
  }
  return col;
}

struct NumericColumn {
  std::vector<double> treated;
  std::vector<double> controls;
  double mean = 0.0;
};

// Raw values with missing entries replaced by the pre-match mean of all units.
NumericColumn numeric_column(const StudyData& data, const std::string& column) {
  require_kind(data, column, ColumnKind::Numeric);
  const std::size_t j = data.column_index(column);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* units : {&data.treated, &data.controls})
    for (const auto& u : *units)
      if (auto* v = std::get_if<double>(&u.covariates[j])) {
        sum += *v;
        ++n;
      }
  NumericColumn out;
  out.mean = n ? sum / static_cast<double>(n) : 0.0;
  auto fill = [&](const std::vector<Unit>& units, std::vector<double>& dst) {
    dst.reserve(units.size());
    for (const auto& u : units) {
      auto* v = std::get_if<double>(&u.covariates[j]);
      dst.push_back(v ? *v : out.mean);
    }
  };
  fill(data.treated, out.treated);
  fill(data.controls, out.controls);
  return out;
}

std::vector<BalanceConstraint> level_indicators(const StudyData& data, const std::string& column, double tol,
                                                const std::string& prefix) {
  const ColumnSpec& col = require_kind(data, column, ColumnKind::Categorical);
  const std::size_t j = data.column_index(column);
  bool any_missing = false;
  for (const auto* units : {&data.treated, &data.controls})
    for (const auto& u : *units) any_missing = any_missing || is_missing(u.covariates[j]);

  std::vector<BalanceConstraint> out;
  const std::size_t n_levels = col.levels.size() + (any_missing ? 1 : 0);
  for (std::size_t l = 0; l < n_levels; ++l) {
    const bool missing_level = l == col.levels.size();
    auto indicator = [&](const Unit& u) -> double {
      const auto& v = u.covariates[j];
      if (missing_level) return is_missing(v) ? 1.0 : 0.0;
      auto* lv = std::get_if<Level>(&v);
      return lv && lv->index == l ? 1.0 : 0.0;
    };
    BalanceConstraint c;
    c.label = prefix + column + "=" + (missing_level ? std::string("NA") : col.levels[l]);
    for (const auto& u : data.treated) c.treated_values.push_back(indicator(u));
    for (const auto& u : data.controls) c.control_values.push_back(indicator(u));
    c.tolerance = tol;
    out.push_back(std::move(c));
  }
  return out;
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return std::nan("");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::vector<BalanceConstraint> fine_balance(const StudyData& data, const std::string& column) {
  return level_indicators(data, column, 0.0, "fine:");
}

std::vector<BalanceConstraint> near_fine_balance(const StudyData& data, const std::string& column, double slack) {
  if (!(slack >= 0.0)) throw Error(ErrorKind::NegativeSlack, "slack " + format_number(slack) + " for '" + column + "'");
  if (slack == 0.0) return fine_balance(data, column);
  return level_indicators(data, column, slack, "nearfine:");
}

double pooled_sd(const StudyData& data, const std::string& column) {
  require_kind(data, column, ColumnKind::Numeric);
  const std::size_t j = data.column_index(column);
  auto observed = [&](const std::vector<Unit>& units) {
    std::vector<double> v;
    for (const auto& u : units)
      if (auto* x = std::get_if<double>(&u.covariates[j])) v.push_back(*x);
    return v;
  };
  const double vt = sample_variance(observed(data.treated));
  const double vc = sample_variance(observed(data.controls));
  if (std::isnan(vt) || std::isnan(vc))
    throw Error(ErrorKind::ZeroVariance, "column '" + column + "' needs two observed values per group for an SD");
  return std::sqrt((vt + vc) / 2.0);
}

BalanceConstraint mean_balance(const StudyData& data, const std::string& column, double tolerance_sd) {
  if (!(tolerance_sd >= 0.0)) throw Error(ErrorKind::BadParams, "tolerance_sd must be >= 0");
  NumericColumn col = numeric_column(data, column);
  const double sd = pooled_sd(data, column);
  BalanceConstraint c;
  c.label = "mean:" + column;
  c.treated_values = std::move(col.treated);
  c.control_values = std::move(col.controls);
  c.tolerance = tolerance_sd * sd;
  if (sd == 0.0 && tolerance_sd > 0.0) c.note = "zero pre-match variance";
  return c;
}

BalanceConstraint moment_balance(const StudyData& data, const std::string& column_a, const std::string& column_b,
                                 double tolerance) {
  if (!(tolerance >= 0.0)) throw Error(ErrorKind::BadParams, "moment tolerance must be >= 0");
  NumericColumn a = numeric_column(data, column_a);
  NumericColumn b = numeric_column(data, column_b);
  const double sa = pooled_sd(data, column_a);
  const double sb = pooled_sd(data, column_b);
  auto z = [](double x, double mean, double sd) { return sd > 0.0 ? (x - mean) / sd : 0.0; };
  BalanceConstraint c;
  c.label = "moment:" + column_a + "*" + column_b;
  for (std::size_t i = 0; i < a.treated.size(); ++i)
    c.treated_values.push_back(z(a.treated[i], a.mean, sa) * z(b.treated[i], b.mean, sb));
  for (std::size_t i = 0; i < a.controls.size(); ++i)
    c.control_values.push_back(z(a.controls[i], a.mean, sa) * z(b.controls[i], b.mean, sb));
  c.tolerance = tolerance;
  return c;
}

std::vector<BalanceConstraint> quantile_grid_balance(const StudyData& data, const std::string& column,
                                                     const std::vector<double>& grid, double slack) {
  if (grid.empty()) throw Error(ErrorKind::BadGrid, "empty grid for '" + column + "'");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw Error(ErrorKind::BadGrid, "non-finite grid point");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw Error(ErrorKind::BadGrid, "grid must be strictly increasing");
  }
  if (!(slack >= 0.0)) throw Error(ErrorKind::NegativeSlack, "quantile-grid slack for '" + column + "'");
  NumericColumn col = numeric_column(data, column);
  std::vector<BalanceConstraint> out;
  for (double g : grid) {
    BalanceConstraint c;
    c.label = "quantile:" + column + "<=" + format_number(g);
    for (double x : col.treated) c.treated_values.push_back(x <= g ? 1.0 : 0.0);
    for (double x : col.controls) c.control_values.push_back(x <= g ? 1.0 : 0.0);
    c.tolerance = slack;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<BalanceConstraint> missingness_balance(const StudyData& data, const std::string& column) {
  const std::size_t j = data.column_index(column);
  BalanceConstraint c;
  c.label = "missing:" + column;
  bool any = false;
  for (const auto& u : data.treated) {
    c.treated_values.push_back(is_missing(u.covariates[j]) ? 1.0 : 0.0);
    any = any || is_missing(u.covariates[j]);
  }
  for (const auto& u : data.controls) {
    c.control_values.push_back(is_missing(u.covariates[j]) ? 1.0 : 0.0);
    any = any || is_missing(u.covariates[j]);
  }
  if (!any) return {};
  return {std::move(c)};
}

std::vector<double> prematch_quantiles(const StudyData& data, const std::string& column, int groups) {
  if (groups < 2) throw Error(ErrorKind::BadParams, "need at least two quantile groups");
  NumericColumn col = numeric_column(data, column);
  std::vector<double> all = col.treated;
  all.insert(all.end(), col.controls.begin(), col.controls.end());
  std::sort(all.begin(), all.end());
  std::vector<double> cuts;
  for (int k = 1; k < groups; ++k) {
    const double h = (static_cast<double>(all.size()) - 1.0) * k / groups;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, all.size() - 1);
    const double q = all[lo] + (h - static_cast<double>(lo)) * (all[hi] - all[lo]);
    if (cuts.empty() || q > cuts.back()) cuts.push_back(q);
  }
  return cuts;
}

std::vector<BalanceCheck> evaluate(const BalanceSpec& spec, const MatchSolution& match) {
  std::size_t pairs = 0;
  for (const auto& set : match.pairing) pairs += set.controls.size();
  if (pairs == 0) throw Error(ErrorKind::EmptyMatch, "match has no pairs");
  std::vector<BalanceCheck> out;
  for (const auto& c : spec.constraints()) {
    double sum = 0.0;
    for (const auto& set : match.pairing)
      for (std::size_t ctrl : set.controls) sum += c.treated_values.at(set.treated) - c.control_values.at(ctrl);
    BalanceCheck chk;
    chk.label = c.label;
    chk.mean_imbalance = sum / static_cast<double>(pairs);
    chk.tolerance = c.tolerance;
    chk.satisfied = std::abs(chk.mean_imbalance) <= c.tolerance + kBalanceSlack;
    out.push_back(std::move(chk));
  }
  return out;
}

double subset_imbalance(const BalanceConstraint& c, const std::vector<std::size_t>& treated,
                        const std::vector<std::size_t>& controls, int ratio) {
  if (treated.empty()) throw Error(ErrorKind::EmptyMatch, "no treated units selected");
  double ft = 0.0, fc = 0.0;
  for (std::size_t t : treated) ft += c.treated_values.at(t);
  for (std::size_t k : controls) fc += c.control_values.at(k);
  return (ratio * ft - fc) / (static_cast<double>(ratio) * static_cast<double>(treated.size()));
}

bool all_satisfied(const std::vector<BalanceCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const BalanceCheck& c) { return c.satisfied; });
}

}  // namespace balmatch
