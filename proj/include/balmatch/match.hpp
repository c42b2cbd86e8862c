#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace balmatch {

enum class Certificate {
  ProvedOptimal,
  Infeasible,
  // search stopped at the node limit; the solution is the best incumbent found
  Withheld,
};

std::string_view to_string(Certificate c);

/// One treated unit and the L controls assigned to it. Indices refer to
/// StudyData::treated and StudyData::controls.
struct MatchedSet {
  std::size_t treated = 0;
  std::vector<std::size_t> controls;
};

struct MatchSolution {
  std::vector<std::size_t> selected_treated;   // ascending
  std::vector<std::size_t> selected_controls;  // ascending
  int ratio = 1;
  std::vector<MatchedSet> pairing;  // ordered by treated index
  std::size_t objective = 0;        // matched-pair count, ratio * |selected_treated|
  Certificate certificate = Certificate::Infeasible;
  std::size_t nodes = 0;
  double total_distance = 0.0;  // only meaningful for distance-minimizing solves

  bool empty() const { return selected_treated.empty(); }
};

}  // namespace balmatch
