#include "balmatch/assignment.hpp"

#include <limits>

#include "balmatch/error.hpp"

namespace balmatch {

Assignment solve_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
  if (rows > cols) throw Error(ErrorKind::DimensionMismatch, "more rows than columns in assignment");
  if (cost.size() != rows * cols) throw Error(ErrorKind::DimensionMismatch, "cost matrix size mismatch");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j, 0 when free
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> p(cols + 1, 0), way(cols + 1, 0);
  std::vector<double> minv(cols + 1);
  std::vector<char> used(cols + 1);

  for (std::size_t i = 1; i <= rows; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* row = &cost[(i0 - 1) * cols];
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.row_to_col.assign(rows, 0);
  for (std::size_t j = 1; j <= cols; ++j)
    if (p[j] != 0) out.row_to_col[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < rows; ++i) out.cost += cost[i * cols + out.row_to_col[i]];
  return out;
}

}  // namespace balmatch
