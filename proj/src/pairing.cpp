#include "balmatch/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "balmatch/assignment.hpp"
#include "balmatch/error.hpp"
#include "balmatch/parallel.hpp"

namespace balmatch {

DistanceMatrix::DistanceMatrix(std::vector<std::size_t> treated_ids, std::vector<std::size_t> control_ids)
    : treated_ids_(std::move(treated_ids)),
      control_ids_(std::move(control_ids)),
      values_(treated_ids_.size() * control_ids_.size(), 0.0) {}

std::vector<double> midranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

DistanceMatrix robust_mahalanobis(const StudyData& data, const std::vector<std::size_t>& treated,
                                  const std::vector<std::size_t>& controls, const std::vector<std::string>& columns) {
  if (columns.empty()) throw Error(ErrorKind::BadParams, "no distance columns given");
  const std::size_t p = columns.size();
  const std::size_t nt = treated.size();
  const std::size_t n = nt + controls.size();
  if (nt == 0 || controls.empty()) throw Error(ErrorKind::EmptyMatch, "distance needs treated and control units");

  auto unit_at = [&](std::size_t i) -> const Unit& {
    return i < nt ? data.treated.at(treated[i]) : data.controls.at(controls[i - nt]);
  };

  Eigen::MatrixXd ranks(n, p);
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t j = data.column_index(columns[k]);
    if (data.schema()[j].kind != ColumnKind::Numeric) throw Error(ErrorKind::NotNumeric, "column '" + columns[k] + "'");
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Unit& u = unit_at(i);
      auto* x = std::get_if<double>(&u.covariates[j]);
      if (!x) throw Error(ErrorKind::BadParams, "unit '" + u.id + "' is missing '" + columns[k] + "'");
      col[i] = *x;
    }
    const auto r = midranks(col);
    for (std::size_t i = 0; i < n; ++i) ranks(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r[i];
  }

  const Eigen::MatrixXd centered = ranks.rowwise() - ranks.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const double nd = static_cast<double>(n);
  const double untied_var = nd * (nd + 1.0) / 12.0;  // sample variance of 1..n
  Eigen::VectorXd scale(p);
  for (std::size_t k = 0; k < p; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (!(cov(kk, kk) > 0.0)) throw Error(ErrorKind::SingularCovariance, "column '" + columns[k] + "' is constant");
    scale(kk) = std::sqrt(untied_var / cov(kk, kk));
  }
  cov = scale.asDiagonal() * cov * scale.asDiagonal();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  lu.setThreshold(1e-10);
  if (lu.rank() < static_cast<Eigen::Index>(p))
    throw Error(ErrorKind::SingularCovariance, "rank covariance matrix is singular");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularCovariance, "rank covariance is not positive definite");

  // whiten: z = M^{-1} r with cov = M M', so the quadratic form is |z_t - z_c|^2
  const Eigen::MatrixXd z = llt.matrixL().solve(ranks.transpose());

  DistanceMatrix dist(treated, controls);
  const std::size_t nc = controls.size();
  parallel_for(nt, [&](std::size_t t) {
    const auto zt = z.col(static_cast<Eigen::Index>(t));
    for (std::size_t c = 0; c < nc; ++c)
      dist(t, c) = (zt - z.col(static_cast<Eigen::Index>(nt + c))).squaredNorm();
  });
  return dist;
}

DistanceMatrix robust_mahalanobis(const StudyData& data, const MatchSolution& match,
                                  const std::vector<std::string>& columns) {
  return robust_mahalanobis(data, match.selected_treated, match.selected_controls, columns);
}

PairedSample optimal_pairing(const DistanceMatrix& distances, int ratio) {
  if (ratio < 1) throw Error(ErrorKind::BadParams, "ratio must be >= 1");
  const std::size_t n = distances.rows();
  const auto l = static_cast<std::size_t>(ratio);
  if (distances.cols() != l * n)
    throw Error(ErrorKind::DimensionMismatch, std::to_string(distances.cols()) + " controls for " + std::to_string(n) +
                                                  " treated at ratio " + std::to_string(ratio));
  for (double v : distances.values())
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorKind::BadParams, "distances must be finite and nonnegative");

  const std::size_t m = n * l;
  std::vector<double> cost(m * m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c) cost[r * m + c] = distances(r / l, c);
  const Assignment a = solve_assignment(cost, m, m);

  PairedSample out;
  for (std::size_t t = 0; t < n; ++t) {
    MatchedSet set;
    set.treated = distances.treated_ids()[t];
    for (std::size_t k = 0; k < l; ++k) {
      const std::size_t c = a.row_to_col[t * l + k];
      set.controls.push_back(distances.control_ids()[c]);
      out.total_distance += distances(t, c);
    }
    std::sort(set.controls.begin(), set.controls.end());
    out.pairs.push_back(std::move(set));
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchedSet& a, const MatchedSet& b) { return a.treated < b.treated; });
  return out;
}

HeterogeneityStats heterogeneity(const PairDifferences& d) {
  const auto& y = d.y;
  if (y.size() < 2) throw Error(ErrorKind::TooFewPairs, "need at least two pairs");
  HeterogeneityStats s;
  const double n = static_cast<double>(y.size());
  s.mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (n - 1.0));
  const double med = median(y);
  std::vector<double> dev;
  dev.reserve(y.size());
  for (double v : y) dev.push_back(std::abs(v - med));
  s.mad = median(std::move(dev));
  return s;
}

}  // namespace balmatch
