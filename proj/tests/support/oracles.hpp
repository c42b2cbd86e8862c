#pragma once

// Slow, obviously-correct reference computations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

struct Constraint {
  std::vector<double> ft, fc;
  double tolerance = 0.0;
};

inline bool balanced(const std::vector<Constraint>& cons, std::uint32_t tmask, std::uint32_t cmask, std::size_t T,
                     std::size_t C, int ratio) {
  const int nt = __builtin_popcount(tmask);
  for (const auto& k : cons) {
    double st = 0.0, sc = 0.0;
    for (std::size_t t = 0; t < T; ++t)
      if (tmask >> t & 1u) st += k.ft[t];
    for (std::size_t c = 0; c < C; ++c)
      if (cmask >> c & 1u) sc += k.fc[c];
    const double mean = (ratio * st - sc) / (ratio * static_cast<double>(nt));
    if (std::abs(mean) > k.tolerance + 1e-9) return false;
  }
  return true;
}

/// Matched-pair count of the best selection, by enumerating every pair of
/// subsets. With ratio >= 2 all treated units must be kept.
inline std::size_t best_match(const std::vector<Constraint>& cons, std::size_t T, std::size_t C, int ratio) {
  std::size_t best = 0;
  for (std::uint32_t tm = 1; tm < (1u << T); ++tm) {
    const auto nt = static_cast<std::size_t>(__builtin_popcount(tm));
    if (ratio >= 2 && nt != T) continue;
    if (nt * ratio <= best) continue;
    for (std::uint32_t cm = 0; cm < (1u << C); ++cm) {
      if (static_cast<std::size_t>(__builtin_popcount(cm)) != nt * ratio) continue;
      if (balanced(cons, tm, cm, T, C, ratio)) {
        best = nt * ratio;
        break;
      }
    }
  }
  return best;
}

/// Minimum over all injective row-to-column maps, by permutation enumeration.
inline double best_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
  std::vector<std::size_t> perm(cols);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += cost[r * cols + perm[r]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Pr(sum of q_i over i with B_i = 1 >= t) for independent B_i ~ Bernoulli(pi_i).
inline double exact_tail(const std::vector<double>& q, const std::vector<double>& pi, double t) {
  const std::size_t n = q.size();
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double s = 0.0, p = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) {
        s += q[i];
        p *= pi[i];
      } else {
        p *= 1.0 - pi[i];
      }
    }
    if (s >= t - 1e-9) total += p;
  }
  return total;
}

/// Median of all pairwise averages (y_i + y_j) / 2, i <= j.
inline double walsh_median(const std::vector<double>& y) {
  std::vector<double> w;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = i; j < y.size(); ++j) w.push_back(0.5 * (y[i] + y[j]));
  std::sort(w.begin(), w.end());
  const std::size_t n = w.size();
  return n % 2 ? w[n / 2] : 0.5 * (w[n / 2 - 1] + w[n / 2]);
}

/// U-statistic score of rank a among n by listing every m-subset of 1..n
/// containing a and counting those where a sits at sorted position lo..hi.
inline double ustat_by_subsets(int a, int n, int m, int lo, int hi) {
  std::vector<int> pick(static_cast<std::size_t>(m));
  std::iota(pick.begin(), pick.end(), 1);
  double hits = 0.0, all = 0.0;
  while (true) {
    all += 1.0;
    const auto it = std::find(pick.begin(), pick.end(), a);
    if (it != pick.end()) {
      const int pos = static_cast<int>(it - pick.begin()) + 1;
      if (pos >= lo && pos <= hi) hits += 1.0;
    }
    int i = m - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - m + i + 1) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < m; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return hits / all;
}

/// Pr(max_k Z_k >= d) for Z ~ N(0, corr) from plain pseudo-random draws.
inline double mvn_max_tail_mc(const std::vector<std::vector<double>>& corr, double d, std::size_t draws,
                              std::uint64_t seed) {
  const std::size_t k = corr.size();
  // Cholesky with zeroed columns for singular pivots
  std::vector<std::vector<double>> l(k, std::vector<double>(k, 0.0));
  for (std::size_t j = 0; j < k; ++j) {
    double s = corr[j][j];
    for (std::size_t p = 0; p < j; ++p) s -= l[j][p] * l[j][p];
    if (s <= 1e-12) continue;
    l[j][j] = std::sqrt(s);
    for (std::size_t i = j + 1; i < k; ++i) {
      double v = corr[i][j];
      for (std::size_t p = 0; p < j; ++p) v -= l[i][p] * l[j][p];
      l[i][j] = v / l[j][j];
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> z(k);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < draws; ++r) {
    for (auto& v : z) v = normal(rng);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      double x = 0.0;
      for (std::size_t p = 0; p <= i; ++p) x += l[i][p] * z[p];
      mx = std::max(mx, x);
    }
    if (mx >= d) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

/// Exact binomial coefficient as a double, by the multiplicative formula on
/// integers (exact for the small arguments used in tests).
inline double choose(long n, long k) {
  if (k < 0 || k > n) return 0.0;
  unsigned long long r = 1;
  for (long i = 1; i <= k; ++i) r = r * static_cast<unsigned long long>(n - k + i) / static_cast<unsigned long long>(i);
  return static_cast<double>(r);
}

}  // namespace oracle
