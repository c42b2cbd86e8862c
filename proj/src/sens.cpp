#include "balmatch/sens.hpp"

#include <algorithm>
#include <cmath>

#include "balmatch/error.hpp"
#include "balmatch/normal.hpp"
#include "balmatch/pairing.hpp"

namespace balmatch {

GammaModel::GammaModel(double gamma) : gamma_(gamma) {
  if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw Error(ErrorKind::BadParams, "gamma must be finite and >= 1");
}

namespace {

double normal_tail(double sum_q, double sum_q2, double p, double observed) {
  const double mu = p * sum_q;
  const double sd = std::sqrt(p * (1.0 - p) * sum_q2);
  return normal_sf((observed - mu) / sd);
}

// Pr(sum_i B_i w_i >= threshold) for independent B_i ~ Bernoulli(p).
double bernoulli_sum_tail(const std::vector<std::size_t>& w, double p, long long threshold) {
  std::size_t total = 0;
  for (std::size_t v : w) total += v;
  if (threshold <= 0) return 1.0;
  if (static_cast<std::size_t>(threshold) > total) return 0.0;
  std::vector<double> dist(total + 1, 0.0);
  dist[0] = 1.0;
  std::size_t reach = 0;
  for (std::size_t v : w) {
    if (v == 0) continue;
    for (std::size_t s = reach + 1; s-- > 0;) {
      dist[s + v] += p * dist[s];
      dist[s] *= 1.0 - p;
    }
    reach += v;
  }
  double tail = 0.0;
  for (std::size_t s = static_cast<std::size_t>(threshold); s <= total; ++s) tail += dist[s];
  return std::min(1.0, tail);
}

}  // namespace

PValueInterval pvalue_bounds_normal(const ScoreVector& scores, const GammaModel& model, double observed) {
  const double sq = scores.sum(), sq2 = scores.sum_squares();
  if (!(sq2 > 0.0)) throw Error(ErrorKind::DegenerateScores, "all scores are zero");
  return {normal_tail(sq, sq2, model.p_lower(), observed), normal_tail(sq, sq2, model.p_upper(), observed)};
}

double critical_value(double sum_q, double sum_q2, const GammaModel& model, double alpha) {
  const double p = model.p_upper();
  return p * sum_q + normal_quantile(1.0 - alpha) * std::sqrt(p * (1.0 - p) * sum_q2);
}

double critical_value(const ScoreVector& scores, const GammaModel& model, double alpha) {
  if (!(scores.sum_squares() > 0.0)) throw Error(ErrorKind::DegenerateScores, "all scores are zero");
  return critical_value(scores.sum(), scores.sum_squares(), model, alpha);
}

PValueInterval pvalue_bounds_exact(const ScoreVector& scores, const GammaModel& model, double observed,
                                   const ExactOptions& options) {
  const auto& q = scores.q;
  if (q.size() > options.max_pairs)
    throw Error(ErrorKind::SupportTooLarge, std::to_string(q.size()) + " pairs exceed the exact-mode cap of " +
                                                std::to_string(options.max_pairs));
  const double total = scores.sum();
  if (observed > total * (1.0 + 1e-12) + 1e-12) return {0.0, 0.0};

  // exact integer scaling when available
  for (double k : {1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 24.0}) {
    std::vector<std::size_t> w;
    std::size_t support = 0;
    bool ok = true;
    for (double v : q) {
      const double s = v * k;
      const double r = std::round(s);
      if (std::abs(s - r) > 1e-9 * std::max(1.0, s)) {
        ok = false;
        break;
      }
      w.push_back(static_cast<std::size_t>(r));
      support += w.back();
    }
    if (!ok) continue;
    if (support > options.max_support) break;
    const auto thr = static_cast<long long>(std::ceil(observed * k - 1e-7));
    return {bernoulli_sum_tail(w, model.p_lower(), thr), bernoulli_sum_tail(w, model.p_upper(), thr)};
  }

  const double step = total * options.grid_fraction;
  if (!(step > 0.0)) throw Error(ErrorKind::DegenerateScores, "all scores are zero");
  std::vector<std::size_t> up, down;
  std::size_t support = 0;
  for (double v : q) {
    up.push_back(static_cast<std::size_t>(std::ceil(v / step - 1e-9)));
    down.push_back(static_cast<std::size_t>(std::floor(v / step + 1e-9)));
    support += up.back();
  }
  if (support > options.max_support) throw Error(ErrorKind::SupportTooLarge, "grid support too large");
  const auto thr = static_cast<long long>(std::ceil(observed / step - 1e-9));
  return {bernoulli_sum_tail(down, model.p_lower(), thr), bernoulli_sum_tail(up, model.p_upper(), thr)};
}

double sensitivity_value(const ScoreVector& scores, double observed, double alpha, BoundMethod method) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::BadParams, "alpha must lie in (0, 1)");
  auto upper = [&](double g) {
    const GammaModel m(g);
    return method == BoundMethod::Normal ? pvalue_bounds_normal(scores, m, observed).upper
                                         : pvalue_bounds_exact(scores, m, observed).upper;
  };
  if (upper(1.0) > alpha) return kSensitiveWithoutBias;
  double lo = 1.0, hi = 2.0;
  constexpr double kGammaCap = 1e6;
  while (upper(hi) <= alpha) {
    lo = hi;
    hi *= 2.0;
    if (hi > kGammaCap) return kGammaCap;
  }
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    if (upper(mid) <= alpha) lo = mid;
    else hi = mid;
  }
  return lo;
}

EstimateInterval hl_interval(const PairDifferences& d, const StatFamily& fam, const GammaModel& model) {
  if (!has_fixed_score_sum(fam))
    throw Error(ErrorKind::UnsupportedFamily, to_string(fam) + " has a data-dependent score total");
  const auto& y = d.y;
  if (y.size() < 2) throw Error(ErrorKind::TooFewPairs, "need at least two pairs");
  if (const auto* uf = std::get_if<family::UStat>(&fam); uf && static_cast<std::size_t>(uf->m) + 1 >= y.size())
    throw Error(ErrorKind::BadParams, "ustat needs m + 1 < number of pairs");

  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const double span = *ymax - *ymin;
  std::vector<double> dev;
  const double med = median(y);
  for (double v : y) dev.push_back(std::abs(v - med));
  double scale = median(dev);
  if (!(scale > 0.0)) scale = span > 0.0 ? span : std::max(1.0, std::abs(*ymin));
  const double tol = 1e-6 * scale;

  PairDifferences shifted;
  shifted.y.resize(y.size());
  // G(tau) = T(y - tau) - p * sum q, nonincreasing in tau
  auto excess = [&](double tau, double p) {
    for (std::size_t i = 0; i < y.size(); ++i) shifted.y[i] = y[i] - tau;
    const ScoreVector s = compute_scores(shifted, fam);
    return statistic_value(s) - p * s.sum();
  };
  auto solve = [&](double p) {
    const double a0 = *ymin - 1.0 - span, b0 = *ymax + 1.0 + span;
    // sup {tau : G > 0}
    double lo = a0, hi = b0;
    for (int it = 0; it < 400 && hi - lo > tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      (excess(mid, p) > 0.0 ? lo : hi) = mid;
    }
    const double left = 0.5 * (lo + hi);
    // inf {tau : G < 0}
    lo = a0;
    hi = b0;
    for (int it = 0; it < 400 && hi - lo > tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      (excess(mid, p) < 0.0 ? hi : lo) = mid;
    }
    const double right = 0.5 * (lo + hi);
    return 0.5 * (left + right);
  };
  EstimateInterval out;
  out.min_estimate = solve(model.p_upper());
  out.max_estimate = model.gamma() == 1.0 ? out.min_estimate : solve(model.p_lower());
  return out;
}

double gamma_of(double lambda, double delta) { return (lambda * delta + 1.0) / (lambda + delta); }

std::vector<AmplificationPoint> amplify(double gamma, const std::vector<double>& lambdas) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw Error(ErrorKind::BadParams, "amplification needs gamma > 1");
  std::vector<AmplificationPoint> out;
  for (double lambda : lambdas) {
    if (!(lambda > gamma) || !std::isfinite(lambda))
      throw Error(ErrorKind::LambdaOutOfRange, "lambda must exceed gamma");
    out.push_back({lambda, (lambda * gamma - 1.0) / (lambda - gamma), gamma});
  }
  return out;
}

}  // namespace balmatch
