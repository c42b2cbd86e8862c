#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "balmatch/error.hpp"
#include "balmatch/pairing.hpp"
#include "support/oracles.hpp"

using namespace balmatch;

namespace {

StudyData study(const std::string& csv) {
  SchemaSpec s;
  s.id_column = "id";
  s.outcome_column = "y";
  s.columns = {{"a", ColumnKind::Numeric, {}, false}, {"b", ColumnKind::Numeric, {}, false}};
  std::istringstream in(csv);
  return read_csv(in, s);
}

}  // namespace

TEST_CASE("midranks average tied positions") {
  CHECK(midranks({3.0, 1.0, 3.0, 2.0}) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
}

TEST_CASE("heterogeneity uses n-1 sd and unscaled mad") {
  const HeterogeneityStats h = heterogeneity(PairDifferences{{1.0, 2.0, 3.0, 4.0, 10.0}});
  CHECK(h.mean == doctest::Approx(4.0));
  CHECK(h.sd == doctest::Approx(std::sqrt(50.0 / 4.0)));
  CHECK(h.mad == doctest::Approx(1.0));
  CHECK_THROWS_AS(heterogeneity(PairDifferences{{1.0}}), Error);
}

TEST_CASE("distance is zero for identical covariates and symmetric in rank gaps") {
  const StudyData d = study(
      "id,group,a,b,y\n"
      "t1,1,1,3,0\nt2,1,2,1,0\nt3,1,3,2,0\n"
      "c1,0,1,3,0\nc2,0,2,1,0\nc3,0,3,2,0\n");
  const DistanceMatrix dm = robust_mahalanobis(d, {0, 1, 2}, {0, 1, 2}, {"a", "b"});
  CHECK(dm(0, 0) == doctest::Approx(0.0));
  CHECK(dm(2, 2) == doctest::Approx(0.0));
  CHECK(dm(0, 1) == doctest::Approx(dm(1, 0)));
  CHECK(dm(0, 1) > 0.0);
  const PairedSample ps = optimal_pairing(dm, 1);
  CHECK(ps.pairs[0].controls.front() == 0);
  CHECK(ps.pairs[1].controls.front() == 1);
  CHECK(ps.pairs[2].controls.front() == 2);
}

TEST_CASE("one covariate distance equals the squared rank gap over the rank variance") {
  const StudyData d = study("id,group,a,b,y\nt1,1,1,0,0\nt2,1,5,0,0\nc1,0,2,0,0\nc2,0,9,0,0\n");
  const DistanceMatrix dm = robust_mahalanobis(d, {0, 1}, {0, 1}, {"a"});
  // ranks t1=1 t2=3 c1=2 c2=4; rank variance of 1..4 with n-1 denominator is 5/3
  CHECK(dm(0, 0) == doctest::Approx(1.0 / (5.0 / 3.0)));
  CHECK(dm(0, 1) == doctest::Approx(9.0 / (5.0 / 3.0)));
}

TEST_CASE("constant or collinear columns are singular") {
  const StudyData d = study("id,group,a,b,y\nt1,1,1,2,0\nt2,1,2,4,0\nc1,0,3,6,0\nc2,0,4,8,0\n");
  try {
    robust_mahalanobis(d, {0, 1}, {0, 1}, {"a", "b"});
    FAIL("expected SingularCovariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularCovariance);
  }
  const StudyData e = study("id,group,a,b,y\nt1,1,1,7,0\nt2,1,2,7,0\nc1,0,3,7,0\nc2,0,4,7,0\n");
  CHECK_THROWS_AS(robust_mahalanobis(e, {0, 1}, {0, 1}, {"a", "b"}), Error);
}

TEST_CASE("optimal pairing matches enumeration and handles several controls") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(rep % 5);
    std::vector<std::size_t> rows(n), cols(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    DistanceMatrix dm(rows, cols);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) dm(r, c) = u(rng);
    const PairedSample ps = optimal_pairing(dm, 1);
    CHECK(ps.total_distance == doctest::Approx(oracle::best_assignment(dm.values(), n, n)));
  }

  DistanceMatrix two({0, 1}, {0, 1, 2, 3});
  const double v[2][4] = {{0, 9, 0, 9}, {9, 0, 9, 0}};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) two(r, c) = v[r][c];
  const PairedSample ps = optimal_pairing(two, 2);
  CHECK(ps.total_distance == doctest::Approx(0.0));
  CHECK(ps.pairs[0].controls == std::vector<std::size_t>{0, 2});
  CHECK_THROWS_AS(optimal_pairing(two, 1), Error);
}
