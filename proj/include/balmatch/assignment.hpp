#pragma once

#include <cstddef>
#include <vector>

namespace balmatch {

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// `cost` is row-major, rows x cols. Shortest augmenting paths with
/// potentials; O(rows^2 * cols).
Assignment solve_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols);

}  // namespace balmatch
