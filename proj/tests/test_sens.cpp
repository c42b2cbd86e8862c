#include <doctest.h>

#include <cmath>
#include <random>

#include "balmatch/error.hpp"
#include "balmatch/normal.hpp"
#include "balmatch/pairing.hpp"
#include "balmatch/sens.hpp"
#include "support/oracles.hpp"

using namespace balmatch;

namespace {

ScoreVector scores_of(std::vector<double> q) {
  ScoreVector s;
  s.family = family::Wilcoxon{};
  s.signs.assign(q.size(), 1);
  s.q = std::move(q);
  return s;
}

}  // namespace

TEST_CASE("normal critical value at gamma one") {
  const ScoreVector s = scores_of({1, 2, 3, 4});
  const double t = critical_value(s, GammaModel(1.0), 0.05);
  CHECK(t == doctest::Approx(5.0 + normal_quantile(0.95) * std::sqrt(7.5)).epsilon(1e-12));
  CHECK(t == doctest::Approx(9.505).epsilon(1e-3));
  const PValueInterval p = pvalue_bounds_normal(s, GammaModel(1.0), t);
  CHECK(p.upper == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(p.lower == p.upper);
}

TEST_CASE("normal bounds limits and degenerate scores") {
  const ScoreVector s = scores_of({1, 2, 3, 4});
  CHECK(pvalue_bounds_normal(s, GammaModel(1e9), 9.0).upper > 0.99);
  CHECK_THROWS_AS(pvalue_bounds_normal(scores_of({0, 0}), GammaModel(2.0), 0.0), Error);
  CHECK_THROWS_AS(GammaModel(0.5), Error);
}

TEST_CASE("exact bounds on tiny cases") {
  CHECK(pvalue_bounds_exact(scores_of({1, 2}), GammaModel(1.0), 3.0).upper == doctest::Approx(0.25));
  CHECK(pvalue_bounds_exact(scores_of({1}), GammaModel(3.0), 1.0).upper == doctest::Approx(0.75));
  CHECK(pvalue_bounds_exact(scores_of({1}), GammaModel(3.0), 1.0).lower == doctest::Approx(0.25));
  CHECK(pvalue_bounds_exact(scores_of({1, 2, 3}), GammaModel(2.0), 6.5).upper == 0.0);
}

TEST_CASE("exact bounds handle fractional and irregular scores") {
  // half-integer midranks are exact after doubling
  const ScoreVector half = scores_of({1.5, 1.5, 3});
  std::vector<double> pi(3, 0.5);
  CHECK(pvalue_bounds_exact(half, GammaModel(1.0), 3.0).upper == doctest::Approx(oracle::exact_tail(half.q, pi, 3.0)));
  // irregular scores fall back to a conservative grid
  const ScoreVector odd = scores_of({0.3141, 1.7, 2.2222, 0.9});
  const GammaModel m(2.0);
  for (double t : {0.5, 1.0, 2.5, 3.0, 4.0}) {
    const PValueInterval p = pvalue_bounds_exact(odd, m, t);
    CHECK(p.upper >= oracle::exact_tail(odd.q, std::vector<double>(4, 2.0 / 3.0), t) - 1e-12);
    CHECK(p.lower <= oracle::exact_tail(odd.q, std::vector<double>(4, 1.0 / 3.0), t) + 1e-12);
  }
}

TEST_CASE("exact mode enforces its pair cap") {
  ExactOptions o;
  o.max_pairs = 5;
  try {
    pvalue_bounds_exact(scores_of({1, 2, 3, 4, 5, 6}), GammaModel(1.0), 3.0, o);
    FAIL("expected SupportTooLarge");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SupportTooLarge);
  }
}

TEST_CASE("sandwich: any admissible assignment probabilities lie between the bounds") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t I = 1 + static_cast<std::size_t>(rep % 10);
    const double gamma = 1.0 + 3.0 * u(rng);
    std::vector<double> y(I);
    for (auto& v : y) v = std::round(20.0 * (u(rng) - 0.3));
    if (std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; })) y[0] = 1.0;
    if (I == 1) y.push_back(2.0);
    const ScoreVector s = compute_scores(PairDifferences{y}, family::Wilcoxon{});
    if (!(s.sum_squares() > 0.0)) continue;
    const GammaModel m(gamma);
    std::vector<double> pi(s.q.size());
    for (auto& p : pi) p = m.p_lower() + (m.p_upper() - m.p_lower()) * u(rng);
    for (double t = 0.0; t <= s.sum() + 0.5; t += 0.5) {
      const PValueInterval b = pvalue_bounds_exact(s, m, t);
      const double truth = oracle::exact_tail(s.q, pi, t);
      CHECK(b.lower <= truth + 1e-12);
      CHECK(truth <= b.upper + 1e-12);
    }
  }
}

TEST_CASE("bounds are monotone in gamma") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z(0.3, 1.0);
  std::vector<double> y(40);
  for (auto& v : y) v = z(rng);
  const ScoreVector s = compute_scores(PairDifferences{y}, family::Wilcoxon{});
  const double t = statistic_value(s);
  double prev_up = 0.0, prev_lo = 1.0;
  for (double g = 1.0; g <= 4.0; g += 0.25) {
    const PValueInterval n = pvalue_bounds_normal(s, GammaModel(g), t);
    const PValueInterval e = pvalue_bounds_exact(s, GammaModel(g), t);
    CHECK(n.upper >= prev_up);
    CHECK(n.lower <= prev_lo);
    CHECK(e.lower <= e.upper);
    prev_up = n.upper;
    prev_lo = n.lower;
  }
}

TEST_CASE("sensitivity value brackets the crossing") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.5, 1.0);
  std::vector<double> y(150);
  for (auto& v : y) v = z(rng);
  const ScoreVector s = compute_scores(PairDifferences{y}, family::Wilcoxon{});
  const double t = statistic_value(s);
  const double g = sensitivity_value(s, t, 0.05);
  REQUIRE(g > 1.0);
  CHECK(pvalue_bounds_normal(s, GammaModel(g), t).upper <= 0.05);
  CHECK(pvalue_bounds_normal(s, GammaModel(g + 2e-3), t).upper > 0.05);

  const double ge = sensitivity_value(s, t, 0.05, BoundMethod::Exact);
  CHECK(pvalue_bounds_exact(s, GammaModel(ge), t).upper <= 0.05);
}

TEST_CASE("sensitivity value sentinel and growth with sample size") {
  const ScoreVector s = scores_of({1, 2, 3, 4});
  CHECK(sensitivity_value(s, 2.0, 0.05) == kSensitiveWithoutBias);
  double prev = 1.0;
  for (int n : {20, 40, 80, 160}) {
    ScoreVector sign;
    sign.family = family::Sign{};
    sign.q.assign(static_cast<std::size_t>(n), 1.0);
    sign.signs.assign(static_cast<std::size_t>(n), 1);
    const double g = sensitivity_value(sign, n, 0.05, BoundMethod::Exact);
    CHECK(g > prev);
    prev = g;
  }
}

TEST_CASE("hodges-lehmann at gamma one is the walsh median") {
  CHECK(hl_interval(PairDifferences{{1, 2, 3}}, family::Wilcoxon{}, GammaModel(1.0)).min_estimate ==
        doctest::Approx(2.0).epsilon(1e-6));
  const EstimateInterval c = hl_interval(PairDifferences{{4, 4, 4, 4}}, family::Wilcoxon{}, GammaModel(1.0));
  CHECK(c.min_estimate == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(c.max_estimate == c.min_estimate);

  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(1.0, 2.0);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> y(5 + rep);
    for (auto& v : y) v = z(rng);
    const EstimateInterval e = hl_interval(PairDifferences{y}, family::Wilcoxon{}, GammaModel(1.0));
    std::vector<double> dev;
    const double med = median(y);
    for (double v : y) dev.push_back(std::abs(v - med));
    CHECK(std::abs(e.min_estimate - oracle::walsh_median(y)) <= 1e-4 * median(dev));
  }
}

TEST_CASE("hodges-lehmann intervals nest as gamma grows") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> z(0.5, 1.0);
  std::vector<double> y(60);
  for (auto& v : y) v = z(rng);
  for (const StatFamily f : {StatFamily{family::Wilcoxon{}}, StatFamily{family::Sign{}},
                             StatFamily{family::UStat{5, 4, 5}}}) {
    EstimateInterval prev = hl_interval(PairDifferences{y}, f, GammaModel(1.0));
    CHECK(prev.min_estimate == prev.max_estimate);
    for (double g : {1.5, 2.0, 3.0}) {
      const EstimateInterval e = hl_interval(PairDifferences{y}, f, GammaModel(g));
      CHECK(e.min_estimate <= prev.min_estimate + 1e-9);
      CHECK(e.max_estimate >= prev.max_estimate - 1e-9);
      prev = e;
    }
  }
  try {
    hl_interval(PairDifferences{y}, family::PermT{}, GammaModel(1.0));
    FAIL("expected UnsupportedFamily");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedFamily);
  }
}

TEST_CASE("amplification points") {
  const auto a = amplify(1.5, {2.0});
  CHECK(a[0].delta == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(amplify(1.42, {3.0})[0].delta == doctest::Approx(2.06).epsilon(0.01));
  CHECK(amplify(1.77, {3.0})[0].delta == doctest::Approx(3.5).epsilon(0.01));
  for (double g : {1.1, 1.5, 2.3, 4.0})
    for (const auto& p : amplify(g, {g + 0.01, g + 1.0, 10.0 * g, 1e4}))
      CHECK(std::abs(gamma_of(p.lambda, p.delta) - g) <= 1e-12);
  CHECK(gamma_of(3.0, 3.0) == doctest::Approx(10.0 / 6.0));
  try {
    amplify(2.0, {1.5});
    FAIL("expected LambdaOutOfRange");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LambdaOutOfRange);
  }
}
