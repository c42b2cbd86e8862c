#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "balmatch/data.hpp"

namespace balmatch {

namespace family {
struct Sign {};
struct Wilcoxon {};
/// U-statistic over subsets of size m counting positive differences in
/// sorted positions m_lo..m_hi.
struct UStat {
  int m = 2;
  int m_lo = 2;
  int m_hi = 2;
};
/// Permutational t: q = |y|.
struct PermT {};
/// Trimmed M-statistic weight in multiples of median |y|: zero below `inner`,
/// one above `outer`, linear in between.
struct MStat {
  double inner = 0.5;
  double outer = 3.0;
};
}  // namespace family

using StatFamily = std::variant<family::Sign, family::Wilcoxon, family::UStat, family::PermT, family::MStat>;

/// Parses "sign", "wilcoxon", "ustat:m,lo,hi", "permt", "mstat[:inner,outer]".
StatFamily parse_family(const std::string& text);
std::vector<StatFamily> parse_families(const std::string& text);  // ';'-separated
std::string to_string(const StatFamily& f);

/// True for families whose score total does not depend on the data.
bool has_fixed_score_sum(const StatFamily& f);

struct ScoreVector {
  std::vector<double> q;
  std::vector<std::uint8_t> signs;  // 1 iff y > 0
  StatFamily family;

  double sum() const;
  double sum_squares() const;
};

/// Scores q_i for a signed-rank statistic. Zero differences get q = 0 and are
/// left out of the ranking, so ranks run over the I' nonzero differences.
ScoreVector compute_scores(const PairDifferences& y, const StatFamily& family);

/// T = sum of q_i over positive differences.
double statistic_value(const ScoreVector& scores);

/// Score for rank a (1..n) in the (m, m_lo, m_hi) family with n ranked
/// differences, via log-gamma binomials.
double ustat_score(long a, long n, const family::UStat& f);

/// Points (a / n, q / max q) for a = 1..n, the scaled weight each family
/// places on the rank of |y|. Data-dependent families (PermT, MStat) throw BadParams.
std::vector<std::pair<double, double>> normalized_weight_curve(const StatFamily& family, int n);

}  // namespace balmatch
