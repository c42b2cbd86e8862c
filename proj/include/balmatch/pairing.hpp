#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "balmatch/data.hpp"
#include "balmatch/match.hpp"

namespace balmatch {

/// Nonnegative distances between treated units (rows) and controls (columns).
/// Row and column ids are indices into StudyData::treated / ::controls.
class DistanceMatrix {
public:
  DistanceMatrix() = default;
  DistanceMatrix(std::vector<std::size_t> treated_ids, std::vector<std::size_t> control_ids);

  std::size_t rows() const { return treated_ids_.size(); }
  std::size_t cols() const { return control_ids_.size(); }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  const std::vector<std::size_t>& treated_ids() const { return treated_ids_; }
  const std::vector<std::size_t>& control_ids() const { return control_ids_; }
  const std::vector<double>& values() const { return values_; }

private:
  std::vector<std::size_t> treated_ids_;
  std::vector<std::size_t> control_ids_;
  std::vector<double> values_;  // row-major
};

struct PairedSample {
  std::vector<MatchedSet> pairs;  // ordered by treated index
  double total_distance = 0.0;
};

struct HeterogeneityStats {
  double mean = 0.0;
  double sd = 0.0;
  double mad = 0.0;  // median absolute deviation from the median, unscaled
};

/// Rank-based Mahalanobis distance over the units of a match.
///
/// Each column is replaced by its midranks over all matched units (treated and
/// controls pooled). The covariance matrix of the ranks is rescaled so every
/// diagonal entry equals the variance of the untied ranks 1..N, which keeps
/// the rank correlations but stops heavily tied columns from dominating. The
/// distance is the quadratic form of the rank-difference vector in the inverse
/// of that matrix. Throws SingularCovariance when it is not invertible.
DistanceMatrix robust_mahalanobis(const StudyData& data, const MatchSolution& match,
                                  const std::vector<std::string>& columns);

/// Same construction with ranks taken over the given units.
DistanceMatrix robust_mahalanobis(const StudyData& data, const std::vector<std::size_t>& treated,
                                  const std::vector<std::size_t>& controls, const std::vector<std::string>& columns);

/// Minimum total distance assignment of `ratio` distinct controls to every
/// row. Requires cols() == ratio * rows().
PairedSample optimal_pairing(const DistanceMatrix& distances, int ratio);

HeterogeneityStats heterogeneity(const PairDifferences& y);

/// Midranks of v (1-based, ties share the average position).
std::vector<double> midranks(const std::vector<double>& v);

double median(std::vector<double> v);

}  // namespace balmatch
