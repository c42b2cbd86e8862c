#pragma once

#include <cstddef>
#include <cstdint>

#include "balmatch/balance.hpp"
#include "balmatch/data.hpp"
#include "balmatch/match.hpp"
#include "balmatch/pairing.hpp"

namespace balmatch {

struct SolverOptions {
  double integrality_tolerance = 1e-6;
  std::size_t node_limit = 200'000;
  // The search is deterministic; the seed is recorded for reproducibility only.
  std::uint64_t deterministic_seed = 0;
  // Try every ratio 2..floor(C/T) instead of stopping at the first infeasible one.
  bool exhaustive_ratio_scan = false;
};

/// Cardinality matching at a fixed ratio L. With L = 1 any subset of treated
/// units may be matched; with L >= 2 every treated unit receives exactly L
/// controls, so the problem is a feasibility question.
struct MatchProblem {
  std::size_t treated_count = 0;
  std::size_t control_count = 0;
  BalanceSpec spec;
  int ratio = 1;
};

MatchProblem make_problem(const StudyData& data, const BalanceSpec& spec, int ratio);

/// Largest balanced selection, solved over T + C unit-selection variables.
/// The pairing in the result is an arbitrary valid assignment. When the node
/// limit stops the search the certificate is Withheld and the best incumbent
/// is returned.
MatchSolution solve_subset_ilp(const MatchProblem& problem, const SolverOptions& options = {});

/// Solves L = 1, then raises L while every treated unit can still be matched.
MatchSolution escalate_ratio(const StudyData& data, const BalanceSpec& spec, const SolverOptions& options = {});

/// Determines the size and ratio with escalate_ratio, then finds, among all
/// balanced matches of that size and ratio, one minimizing the total
/// within-set distance. `distances` must cover every treated unit and control
/// that may be selected; cells absent from it cannot be paired.
MatchSolution closest_largest_match(const StudyData& data, const BalanceSpec& spec, const DistanceMatrix& distances,
                                    const SolverOptions& options = {});

/// As above, with the size (treated count) and ratio already known.
MatchSolution closest_match_of_size(const StudyData& data, const BalanceSpec& spec, const DistanceMatrix& distances,
                                    std::size_t treated_count, int ratio, const SolverOptions& options = {});

}  // namespace balmatch
