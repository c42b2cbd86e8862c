#include "balmatch/multitest.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "balmatch/error.hpp"
#include "balmatch/normal.hpp"

namespace balmatch {

namespace {

using Matrix = std::vector<std::vector<double>>;

// Lower-triangular factor of a positive semidefinite matrix; pivots that
// vanish leave a zero column.
Matrix semidefinite_cholesky(const Matrix& a) {
  const std::size_t n = a.size();
  Matrix l(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
    if (d <= 1e-10) continue;
    l[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      l[i][j] = s / l[j][j];
    }
  }
  return l;
}

constexpr double kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

// Pr(all Z < b) at one point w of the unit cube.
double integrand(const Matrix& l, double b, const std::vector<double>& w, std::vector<double>& y) {
  const std::size_t n = l.size();
  double prob = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < i; ++k) s += l[i][k] * y[k];
    if (l[i][i] == 0.0) {
      if (s >= b) return 0.0;
      y[i] = 0.0;
      continue;
    }
    const double e = normal_cdf((b - s) / l[i][i]);
    prob *= e;
    if (prob == 0.0) return 0.0;
    if (i + 1 < n) {
      const double u = std::clamp(w[i] * e, 1e-300, 1.0 - 1e-16);
      y[i] = normal_quantile(u);
    }
  }
  return prob;
}

}  // namespace

TailEstimate mvn_max_tail(const Matrix& corr, double threshold, const LatticeOptions& options) {
  const std::size_t n = corr.size();
  if (n == 0 || n > std::size(kPrimes)) throw Error(ErrorKind::BadParams, "dimension out of range");
  if (n == 1) return {normal_sf(threshold), 0.0};
  const Matrix l = semidefinite_cholesky(corr);

  std::vector<double> alpha(n);
  for (std::size_t i = 0; i < n; ++i) alpha[i] = std::fmod(std::sqrt(kPrimes[i]), 1.0);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> w(n), y(n), shift(n);
  double mean = 0.0, sq = 0.0;
  for (std::size_t s = 0; s < options.shifts; ++s) {
    for (auto& v : shift) v = unif(rng);
    double acc = 0.0;
    for (std::size_t k = 1; k <= options.points; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = std::fmod(static_cast<double>(k) * alpha[i] + shift[i], 1.0);
        w[i] = std::abs(2.0 * x - 1.0);  // tent transform
      }
      acc += integrand(l, threshold, w, y);
    }
    const double est = 1.0 - acc / static_cast<double>(options.points);
    const double delta = est - mean;
    mean += delta / static_cast<double>(s + 1);
    sq += delta * (est - mean);
  }
  const double shifts = static_cast<double>(options.shifts);
  const double se = options.shifts > 1 ? std::sqrt(sq / (shifts - 1.0) / shifts) : 0.0;
  return {std::clamp(mean, 0.0, 1.0), se};
}

namespace {

struct FamilyScores {
  std::vector<ScoreVector> scores;
  std::vector<double> observed;
};

FamilyScores score_all(const PairDifferences& y, const std::vector<StatFamily>& families) {
  if (families.size() > kMaxFamilies) throw Error(ErrorKind::TooManyFamilies, "at most 8 statistics");
  if (families.size() < 2) throw Error(ErrorKind::BadParams, "need at least two statistics");
  FamilyScores out;
  for (const auto& f : families) {
    out.scores.push_back(compute_scores(y, f));
    if (!(out.scores.back().sum_squares() > 0.0))
      throw Error(ErrorKind::DegenerateScores, to_string(f) + " has all scores zero");
    out.observed.push_back(statistic_value(out.scores.back()));
  }
  return out;
}

Matrix correlation_of(const std::vector<ScoreVector>& scores) {
  const std::size_t k = scores.size();
  Matrix r(k, std::vector<double>(k, 1.0));
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      double cross = 0.0;
      for (std::size_t i = 0; i < scores[a].q.size(); ++i) cross += scores[a].q[i] * scores[b].q[i];
      const double v = std::min(1.0, cross / std::sqrt(scores[a].sum_squares() * scores[b].sum_squares()));
      r[a][b] = r[b][a] = v;
    }
  return r;
}

double deviate(const ScoreVector& s, double observed, double p) {
  return (observed - p * s.sum()) / std::sqrt(p * (1.0 - p) * s.sum_squares());
}

}  // namespace

JointTest joint_test(const PairDifferences& y, const std::vector<StatFamily>& families, const GammaModel& model) {
  const FamilyScores fs = score_all(y, families);
  JointTest jt;
  jt.families = families;
  jt.correlation = correlation_of(fs.scores);
  for (std::size_t k = 0; k < families.size(); ++k) {
    jt.deviates.push_back(deviate(fs.scores[k], fs.observed[k], model.p_upper()));
    jt.single_upper.push_back(normal_sf(jt.deviates.back()));
  }
  return jt;
}

CorrectedPValue corrected_pvalue(const PairDifferences& y, const std::vector<StatFamily>& families,
                                 const GammaModel& model, const LatticeOptions& options) {
  const FamilyScores fs = score_all(y, families);
  CorrectedPValue out;
  out.joint = joint_test(y, families, model);
  double lower_dev = -INFINITY;
  for (std::size_t k = 0; k < families.size(); ++k)
    lower_dev = std::max(lower_dev, deviate(fs.scores[k], fs.observed[k], model.p_lower()));
  const double upper_dev = *std::max_element(out.joint.deviates.begin(), out.joint.deviates.end());
  out.min_single = normal_sf(upper_dev);

  const TailEstimate up = mvn_max_tail(out.joint.correlation, upper_dev, options);
  const TailEstimate lo = model.gamma() == 1.0 ? up : mvn_max_tail(out.joint.correlation, lower_dev, options);
  // keep integration noise inside [smallest single bound, union bound]
  const double k = static_cast<double>(families.size());
  out.bound.upper = std::clamp(up.value, out.min_single, std::min(1.0, k * out.min_single));
  out.bound.lower = std::min(std::max(lo.value, normal_sf(lower_dev)), out.bound.upper);
  out.error = up.error;
  return out;
}

}  // namespace balmatch
