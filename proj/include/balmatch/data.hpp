#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "balmatch/match.hpp"

namespace balmatch {

enum class Group { Treated, Control };

struct Missing {
  friend bool operator==(Missing, Missing) { return true; }
};

/// Index into the declared level list of a categorical column.
struct Level {
  std::size_t index = 0;
  friend bool operator==(Level, Level) = default;
};

using CovariateValue = std::variant<Missing, double, Level>;

inline bool is_missing(const CovariateValue& v) { return std::holds_alternative<Missing>(v); }

enum class ColumnKind { Numeric, Categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  // Declared levels form a closed set. When empty for a categorical column the
  // levels are enumerated in order of first appearance.
  std::vector<std::string> levels;
  bool missing_allowed = false;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Column declarations consumed by load_csv.
struct SchemaSpec {
  std::string id_column;  // empty: ids are 1-based data row numbers
  std::string group_column = "group";
  std::string treated_code = "1";
  std::string control_code = "0";
  std::string outcome_column;  // empty: no outcome
  std::vector<ColumnSpec> columns;
};

struct Unit {
  std::string id;
  Group group = Group::Treated;
  std::vector<CovariateValue> covariates;
  std::optional<double> outcome;
  std::size_t row = 0;  // 0-based data row in the source file

  friend bool operator==(const Unit&, const Unit&) = default;
};

struct StudyData {
  SchemaSpec spec;                 // as loaded; columns carry the resolved level lists
  std::vector<Unit> treated;
  std::vector<Unit> controls;

  const std::vector<ColumnSpec>& schema() const { return spec.columns; }
  std::size_t column_index(const std::string& name) const;  // throws UnknownColumn
  const ColumnSpec& column(const std::string& name) const { return spec.columns[column_index(name)]; }
  const Unit& unit(Group g, std::size_t i) const { return g == Group::Treated ? treated[i] : controls[i]; }
};

bool operator==(const StudyData& a, const StudyData& b);

/// Treated-minus-control outcome differences, one per matched pair.
struct PairDifferences {
  std::vector<double> y;
};

StudyData load_csv(const std::filesystem::path& path, const SchemaSpec& spec);
StudyData read_csv(std::istream& in, const SchemaSpec& spec);

/// Writes the data back in source row order; read_csv on the output with the
/// same SchemaSpec reproduces the StudyData.
void write_csv(std::ostream& out, const StudyData& data);

/// Pair differences for a 1-to-1 pairing, in pairing order (treated index order).
PairDifferences pair_differences(const std::vector<MatchedSet>& pairing, const StudyData& data);
PairDifferences pair_differences(const MatchSolution& match, const StudyData& data);

/// Copy of the data with outcomes taken from another column of the same file.
/// Only numeric outcome columns are meaningful; used by the CLI `--outcome` flag.
SchemaSpec with_outcome(SchemaSpec spec, const std::string& outcome_column);

}  // namespace balmatch
