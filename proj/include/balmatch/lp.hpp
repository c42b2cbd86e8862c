#pragma once

// Bounded-variable dual simplex and a binary branch-and-bound driver.
//
// Problems have the form
//   minimize    c'x
//   subject to  row_lo <= A x <= row_hi
//               col_lo <= x <= col_hi      (column bounds must be finite)
// Finite column bounds make the all-logical starting basis dual feasible, so
// the dual simplex alone solves every LP and re-optimizes cheaply after the
// bound changes made by branching.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace balmatch::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Entry {
  int row = 0;
  double value = 0.0;
};

class Problem {
public:
  int add_row(double lo, double hi);
  int add_column(double cost, double lo, double hi, std::vector<Entry> entries);

  int rows() const { return static_cast<int>(row_lo_.size()); }
  int cols() const { return static_cast<int>(cost_.size()); }

  const std::vector<double>& cost() const { return cost_; }
  const std::vector<double>& col_lo() const { return col_lo_; }
  const std::vector<double>& col_hi() const { return col_hi_; }
  const std::vector<double>& row_lo() const { return row_lo_; }
  const std::vector<double>& row_hi() const { return row_hi_; }
  const std::vector<Entry>& column(int j) const { return columns_[static_cast<std::size_t>(j)]; }

private:
  std::vector<double> cost_, col_lo_, col_hi_, row_lo_, row_hi_;
  std::vector<std::vector<Entry>> columns_;
};

enum class Status { Optimal, Infeasible, IterationLimit };

class DualSimplex {
public:
  explicit DualSimplex(const Problem& problem);

  /// Replaces the structural costs (length Problem::cols()).
  void set_costs(const std::vector<double>& cost);

  /// Replaces the structural column bounds (lengths equal Problem::cols()).
  void set_column_bounds(const std::vector<double>& lo, const std::vector<double>& hi);

  /// Basic variable per row; indices >= cols() denote row logicals.
  const std::vector<int>& basis() const { return head_; }
  void load_basis(const std::vector<int>& head);

  Status solve(std::size_t max_iterations = 1'000'000);

  /// Structural primal values of the last solve.
  std::vector<double> solution() const;
  /// Objective at the working costs, which may include shifts made during the solve.
  double objective() const;
  /// Bound on |working - given| objective over the box, counting only the shifts.
  double shift_bound() const { return shift_bound_; }
  /// Lower bound on the LP value under `cost`, from the current basis duals;
  /// -inf when a dual pairs with an unbounded row side.
  double dual_bound(const std::vector<double>& cost) const;
  std::size_t iterations() const { return total_iterations_; }

private:
  void refactor();
  void compute_primal();
  void compute_duals();
  void place_nonbasic();
  double column_dot(const Eigen::VectorXd& rho, int var) const;
  Eigen::VectorXd ftran(int var) const;

  int m_ = 0;
  int n_ = 0;
  std::vector<std::vector<Entry>> cols_;  // scaled structural columns
  std::vector<double> base_cost_;         // length n + m
  std::vector<double> cost_;              // base_cost_ plus shifts of the current solve
  double shift_bound_ = 0.0;
  std::vector<double> lo_, hi_;           // length n + m, logical bounds in scaled row units
  std::vector<double> row_scale_;
  std::vector<int> head_;                 // basis head, length m
  std::vector<int> pos_;                  // position in head, or -1 when nonbasic
  std::vector<double> x_;                 // length n + m
  std::vector<double> d_;                 // reduced costs, length n + m
  std::vector<double> alpha_;             // pivot row scratch
  Eigen::MatrixXd binv_;
  std::size_t since_refactor_ = 0;
  std::size_t total_iterations_ = 0;
};

struct BranchOptions {
  double integrality_tolerance = 1e-6;
  std::size_t node_limit = 200'000;
  // Objective takes integer values at integral points, so a node whose bound
  // cannot beat the incumbent by at least one is pruned.
  bool integral_objective = false;
  // Each cost is raised by a distinct amount in [p, 2p] during the LP solves
  // to break dual degeneracy; node bounds are loosened to stay valid and
  // incumbents are scored at the original costs. Zero disables it.
  double cost_perturbation = 1e-6;
};

enum class MipStatus { Optimal, Infeasible, NodeLimit };

struct MipResult {
  MipStatus status = MipStatus::Infeasible;
  std::vector<double> x;  // rounded incumbent; empty when none
  double objective = kInf;
  std::size_t nodes = 0;
};

struct Incumbent {
  std::vector<double> x;
  double objective = kInf;
};

/// Accepts or rejects a rounded integral point (e.g. an exact feasibility recheck).
using IntegralCheck = std::function<bool(const std::vector<double>&)>;

/// Turns a fractional LP point into a candidate integral point, or gives up.
using RoundingHeuristic = std::function<std::optional<std::vector<double>>(const std::vector<double>&)>;

/// Branch-and-bound over an all-binary problem. Nodes are explored best bound
/// first; among equal bounds the most recently created node goes first. The
/// branching variable is the most fractional one, ties to the lowest index,
/// and the up branch is created last. A rounding heuristic, when given, runs
/// on the fractional points of early nodes and then periodically; its points
/// pass through `check` like any other.
MipResult solve_binary(const Problem& problem, const BranchOptions& options,
                       std::optional<Incumbent> warm = std::nullopt, const IntegralCheck& check = {},
                       const RoundingHeuristic& rounding = {});

}  // namespace balmatch::lp
