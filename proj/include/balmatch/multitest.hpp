#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "balmatch/data.hpp"
#include "balmatch/scores.hpp"
#include "balmatch/sens.hpp"

namespace balmatch {

inline constexpr std::size_t kMaxFamilies = 8;

struct JointTest {
  std::vector<StatFamily> families;
  std::vector<std::vector<double>> correlation;
  std::vector<double> deviates;      // (T - mean) / sd under the upper bounding law
  std::vector<double> single_upper;  // per-family upper bound 1 - Phi(deviate)
};

struct TailEstimate {
  double value = 0.0;
  double error = 0.0;  // standard error across randomized lattice shifts
};

struct LatticeOptions {
  std::size_t points = 20000;
  std::size_t shifts = 10;
  std::uint64_t seed = 20120901;
};

/// Pr(max_k Z_k >= threshold) for Z ~ N(0, correlation). The correlation
/// matrix may be singular. Computed by separation of variables over a
/// randomly shifted rank-1 lattice.
TailEstimate mvn_max_tail(const std::vector<std::vector<double>>& correlation, double threshold,
                          const LatticeOptions& options = {});

JointTest joint_test(const PairDifferences& y, const std::vector<StatFamily>& families, const GammaModel& model);

struct CorrectedPValue {
  PValueInterval bound;
  double error = 0.0;  // integration error of bound.upper
  double min_single = 0.0;
  JointTest joint;
};

/// Smallest upper-bound P-value over several statistics, corrected for
/// having looked at all of them.
CorrectedPValue corrected_pvalue(const PairDifferences& y, const std::vector<StatFamily>& families,
                                 const GammaModel& model, const LatticeOptions& options = {});

}  // namespace balmatch
