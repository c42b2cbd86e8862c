#pragma once

#include <string>
#include <vector>

#include "balmatch/data.hpp"
#include "balmatch/match.hpp"

namespace balmatch {

/// One balance constraint in separable form: the per-unit values f(x) for every
/// treated unit and every control, plus the tolerance b on the mean of
/// f(x_treated) - f(x_control) over matched pairs.
struct BalanceConstraint {
  std::string label;
  std::vector<double> treated_values;  // length T
  std::vector<double> control_values;  // length C
  double tolerance = 0.0;
  std::string note;  // advisory, e.g. zero pre-match variance
};

class BalanceSpec {
public:
  BalanceSpec() = default;

  /// Appends a constraint; throws BadConfig on a duplicate label or bad sizes.
  void add(BalanceConstraint c);
  void add(std::vector<BalanceConstraint> cs);

  const std::vector<BalanceConstraint>& constraints() const { return constraints_; }
  std::size_t size() const { return constraints_.size(); }
  bool empty() const { return constraints_.empty(); }

private:
  std::vector<BalanceConstraint> constraints_;
};

struct BalanceCheck {
  std::string label;
  double mean_imbalance = 0.0;
  double tolerance = 0.0;
  bool satisfied = false;
};

/// Absolute slack used when comparing a mean imbalance against its tolerance.
inline constexpr double kBalanceSlack = 1e-9;

// Categorical columns. Units with a missing value form their own level.
std::vector<BalanceConstraint> fine_balance(const StudyData& data, const std::string& column);
std::vector<BalanceConstraint> near_fine_balance(const StudyData& data, const std::string& column, double slack);

// Numeric columns. Missing entries take the column's pre-match mean inside f.
BalanceConstraint mean_balance(const StudyData& data, const std::string& column, double tolerance_sd);
BalanceConstraint moment_balance(const StudyData& data, const std::string& column_a, const std::string& column_b,
                                 double tolerance);
std::vector<BalanceConstraint> quantile_grid_balance(const StudyData& data, const std::string& column,
                                                     const std::vector<double>& grid, double slack);

/// Fine-balance constraint on the missingness indicator of a column, or an
/// empty vector when the column has no missing values.
std::vector<BalanceConstraint> missingness_balance(const StudyData& data, const std::string& column);

/// Pre-match pooled standard deviation sqrt((s_T^2 + s_C^2) / 2) over non-missing values.
double pooled_sd(const StudyData& data, const std::string& column);

/// Interior cut points splitting the pooled pre-match values into `groups`
/// equal-probability groups (type-7 quantiles). groups = 5 gives quintile cuts.
std::vector<double> prematch_quantiles(const StudyData& data, const std::string& column, int groups);

/// Mean imbalance of every constraint over the matched pairs of `match`.
std::vector<BalanceCheck> evaluate(const BalanceSpec& spec, const MatchSolution& match);

/// Mean imbalance computed from the selected subsets only:
/// (L * sum f(treated) - sum f(controls)) / (L * |treated|).
double subset_imbalance(const BalanceConstraint& c, const std::vector<std::size_t>& treated,
                        const std::vector<std::size_t>& controls, int ratio);

bool all_satisfied(const std::vector<BalanceCheck>& checks);

}  // namespace balmatch
