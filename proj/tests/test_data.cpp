#include <doctest.h>

#include <sstream>

#include "balmatch/data.hpp"
#include "balmatch/error.hpp"

using namespace balmatch;

namespace {

SchemaSpec numeric_schema() {
  SchemaSpec s;
  s.id_column = "id";
  s.outcome_column = "y";
  s.columns = {{"x", ColumnKind::Numeric, {}, true}};
  return s;
}

ErrorKind kind_of(const std::string& csv, const SchemaSpec& spec) {
  std::istringstream in(csv);
  try {
    read_csv(in, spec);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::BadConfig;
}

}  // namespace

TEST_CASE("minimal file loads one unit per group") {
  std::istringstream in("id,group,x,y\n1,1,0.5,3\n2,0,0.25,1\n");
  const StudyData d = read_csv(in, numeric_schema());
  CHECK(d.treated.size() == 1);
  CHECK(d.controls.size() == 1);
  CHECK(std::get<double>(d.treated[0].covariates[0]) == 0.5);
  CHECK(*d.controls[0].outcome == 1.0);
}

TEST_CASE("fixture with a categorical and a numeric column") {
  SchemaSpec s;
  s.id_column = "id";
  s.outcome_column = "y";
  s.columns = {{"gender", ColumnKind::Categorical, {"M", "F"}, false}, {"score", ColumnKind::Numeric, {}, true}};
  const StudyData d = load_csv(BALMATCH_FIXTURES "/small.csv", s);
  CHECK(d.treated.size() == 3);
  CHECK(d.controls.size() == 5);
  CHECK(d.schema().size() == 2);
  CHECK(is_missing(d.treated[2].covariates[1]));
  CHECK(std::get<Level>(d.treated[1].covariates[0]).index == 1);
  CHECK_FALSE(d.controls[4].outcome.has_value());
}

TEST_CASE("row arity and codes are validated") {
  const auto s = numeric_schema();
  CHECK(kind_of("id,group,x,y\n1,1,0.5\n2,0,1,1\n", s) == ErrorKind::MalformedRow);
  CHECK(kind_of("id,group,x,y\n1,1,0.5,1\n2,7,1,1\n", s) == ErrorKind::MalformedRow);
  CHECK(kind_of("id,group,x,y\n1,1,0.5,1\n1,0,1,1\n", s) == ErrorKind::MalformedRow);
  CHECK(kind_of("id,group,x,y\n1,1,0.5,1\n2,1,1,1\n", s) == ErrorKind::EmptyGroup);
  {
    std::istringstream in("id,group,x,y\n1,1,abc,1\n2,0,1,1\n");
    CHECK(is_missing(read_csv(in, s).treated[0].covariates[0]));
  }

  SchemaSpec strict = s;
  strict.columns[0].missing_allowed = false;
  CHECK(kind_of("id,group,x,y\n1,1,abc,1\n2,0,1,1\n", strict) == ErrorKind::MalformedRow);
  CHECK(kind_of("id,group,x,y\n1,1,NA,1\n2,0,1,1\n", strict) == ErrorKind::MalformedRow);

  SchemaSpec cat;
  cat.columns = {{"g", ColumnKind::Categorical, {"a", "b"}, false}};
  CHECK(kind_of("group,g\n1,a\n0,z\n", cat) == ErrorKind::UnknownLevel);
}

TEST_CASE("malformed row message names the row") {
  std::istringstream in("id,group,x,y\n1,1,0.5,1\n2,0,1\n");
  try {
    read_csv(in, numeric_schema());
    FAIL("expected MalformedRow");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("open level sets follow first appearance") {
  SchemaSpec s;
  s.columns = {{"g", ColumnKind::Categorical, {}, false}};
  std::istringstream in("group,g\n1,zeta\n0,alpha\n0,zeta\n");
  const StudyData d = read_csv(in, s);
  REQUIRE(d.schema()[0].levels == std::vector<std::string>{"zeta", "alpha"});
  CHECK(std::get<Level>(d.controls[0].covariates[0]).index == 1);
}

TEST_CASE("csv round trip reproduces the data") {
  SchemaSpec s;
  s.id_column = "id";
  s.outcome_column = "y";
  s.columns = {{"gender", ColumnKind::Categorical, {"M", "F"}, false}, {"score", ColumnKind::Numeric, {}, true}};
  const StudyData d = load_csv(BALMATCH_FIXTURES "/small.csv", s);
  std::stringstream buf;
  write_csv(buf, d);
  const StudyData again = read_csv(buf, s);
  CHECK(again == d);
}

TEST_CASE("csv round trip on generated data") {
  std::uint64_t state = 99;
  auto next = [&] {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return state >> 33;
  };
  for (int rep = 0; rep < 20; ++rep) {
    SchemaSpec s;
    s.id_column = "id";
    s.outcome_column = "y";
    s.columns = {{"c", ColumnKind::Categorical, {}, true}, {"v", ColumnKind::Numeric, {}, true}};
    std::ostringstream csv;
    csv << "id,group,c,v,y\n";
    const int n = 2 + static_cast<int>(next() % 30);
    for (int i = 0; i < n; ++i) {
      const int group = i < 1 ? 1 : i < 2 ? 0 : static_cast<int>(next() % 2);
      csv << "u" << i << ',' << group << ',';
      if (next() % 7 == 0) csv << "NA";
      else csv << "lvl" << next() % 4;
      csv << ',';
      if (next() % 5 == 0) csv << "";
      else csv << static_cast<double>(static_cast<int>(next() % 20001) - 10000) / 7.0;
      csv << ',' << static_cast<double>(next() % 1000) / 3.0 << '\n';
    }
    std::istringstream in(csv.str());
    const StudyData d = read_csv(in, s);
    CHECK(d.treated.size() + d.controls.size() == static_cast<std::size_t>(n));
    std::stringstream buf;
    write_csv(buf, d);
    CHECK(read_csv(buf, d.spec) == d);
  }
}

TEST_CASE("pair differences subtract control from treated") {
  std::istringstream in("id,group,x,y\nt1,1,0,5\nt2,1,0,1\nt3,1,0,7\nc1,0,0,2\nc2,0,0,4\nc3,0,0,7\n");
  const StudyData d = read_csv(in, numeric_schema());
  const std::vector<MatchedSet> pairs{{0, {0}}, {1, {1}}, {2, {2}}};
  CHECK(pair_differences(pairs, d).y == std::vector<double>{3, -3, 0});

  // swapping roles negates every difference
  std::istringstream swapped("id,group,x,y\nt1,0,0,5\nt2,0,0,1\nt3,0,0,7\nc1,1,0,2\nc2,1,0,4\nc3,1,0,7\n");
  const StudyData e = read_csv(swapped, numeric_schema());
  CHECK(pair_differences(pairs, e).y == std::vector<double>{-3, 3, -0.0});
}

TEST_CASE("pair differences report the unit with no outcome") {
  std::istringstream in("id,group,x,y\nt1,1,0,5\nc1,0,0,\n");
  const StudyData d = read_csv(in, numeric_schema());
  try {
    pair_differences(std::vector<MatchedSet>{{0, {0}}}, d);
    FAIL("expected MissingOutcome");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingOutcome);
    CHECK(std::string(e.what()).find("c1") != std::string::npos);
  }
}
