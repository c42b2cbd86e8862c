#pragma once

#include <cstddef>
#include <vector>

#include "balmatch/data.hpp"
#include "balmatch/scores.hpp"

namespace balmatch {

/// Bias bound: within a pair, the odds of treatment differ by at most gamma.
class GammaModel {
public:
  explicit GammaModel(double gamma);
  double gamma() const { return gamma_; }
  /// Largest assignment probability, gamma / (1 + gamma).
  double p_upper() const { return gamma_ / (1.0 + gamma_); }
  double p_lower() const { return 1.0 / (1.0 + gamma_); }

private:
  double gamma_;
};

/// One-sided (upper tail) P-value bounds.
struct PValueInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct EstimateInterval {
  double min_estimate = 0.0;
  double max_estimate = 0.0;
};

struct AmplificationPoint {
  double lambda = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
};

/// Large-sample bounds: T compared with the normal law of the sum of
/// independent q_i * Bernoulli(p) for p = gamma/(1+gamma) (upper) and
/// 1/(1+gamma) (lower).
PValueInterval pvalue_bounds_normal(const ScoreVector& scores, const GammaModel& model, double observed);

/// Critical value t with approximate upper-bound P-value alpha at this gamma.
double critical_value(const ScoreVector& scores, const GammaModel& model, double alpha);
double critical_value(double sum_q, double sum_q2, const GammaModel& model, double alpha);

struct ExactOptions {
  std::size_t max_pairs = 500;
  std::size_t max_support = 4'000'000;
  // grid step as a fraction of sum q when scores are not small integer multiples
  double grid_fraction = 1e-4;
};

/// Exact bounds by convolving the bounding distributions over an integer
/// support. Scores that are integer multiples of 1/k for small k are used
/// exactly; other scores are placed on a grid, rounded up for the upper bound
/// and down for the lower bound so both stay conservative.
PValueInterval pvalue_bounds_exact(const ScoreVector& scores, const GammaModel& model, double observed,
                                   const ExactOptions& options = {});

enum class BoundMethod { Normal, Exact };

/// Sentinel from sensitivity_value when the result is significant at no gamma >= 1.
inline constexpr double kSensitiveWithoutBias = 0.0;

/// Largest gamma whose upper-bound P-value stays at or below alpha, to 1e-3.
double sensitivity_value(const ScoreVector& scores, double observed, double alpha,
                         BoundMethod method = BoundMethod::Normal);

/// Interval of Hodges-Lehmann estimates of a constant shift under the gamma
/// model. Supported for families with a data-free score sum.
EstimateInterval hl_interval(const PairDifferences& y, const StatFamily& family, const GammaModel& model);

/// Points (lambda, delta) with (lambda*delta + 1) / (lambda + delta) = gamma.
std::vector<AmplificationPoint> amplify(double gamma, const std::vector<double>& lambdas);
double gamma_of(double lambda, double delta);

}  // namespace balmatch
