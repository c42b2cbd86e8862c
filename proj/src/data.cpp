#include "balmatch/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "balmatch/error.hpp"

namespace balmatch {

std::string_view to_string(Certificate c) {
  switch (c) {
    case Certificate::ProvedOptimal: return "ProvedOptimal";
    case Certificate::Infeasible: return "Infeasible";
    case Certificate::Withheld: return "Withheld";
  }
  return "Unknown";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record. Double-quoted fields may contain commas; "" escapes a quote.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.emplace_back(trim(cur));
  return fields;
}

bool is_missing_token(std::string_view s) { return s.empty() || s == "NA" || s == "na" || s == "NaN"; }

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  return out + "\"";
}

std::string row_label(std::size_t line_no) { return "row " + std::to_string(line_no); }

}  // namespace

std::size_t StudyData::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < spec.columns.size(); ++j)
    if (spec.columns[j].name == name) return j;
  throw Error(ErrorKind::UnknownColumn, "no covariate column named '" + name + "'");
}

bool operator==(const StudyData& a, const StudyData& b) {
  return a.spec.columns == b.spec.columns && a.spec.id_column == b.spec.id_column &&
         a.spec.group_column == b.spec.group_column && a.spec.outcome_column == b.spec.outcome_column &&
         a.treated == b.treated && a.controls == b.controls;
}

StudyData read_csv(std::istream& in, const SchemaSpec& spec) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MalformedRow, "missing header row");
  const auto header = split_record(line);

  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::UnknownColumn, "column '" + name + "' not in header");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t group_pos = find_col(spec.group_column);
  const std::optional<std::size_t> id_pos =
      spec.id_column.empty() ? std::nullopt : std::optional(find_col(spec.id_column));
  const std::optional<std::size_t> outcome_pos =
      spec.outcome_column.empty() ? std::nullopt : std::optional(find_col(spec.outcome_column));
  std::vector<std::size_t> cov_pos;
  for (const auto& c : spec.columns) cov_pos.push_back(find_col(c.name));

  StudyData data;
  data.spec = spec;
  // open categorical columns collect their levels as they appear
  std::vector<std::map<std::string, std::size_t, std::less<>>> level_maps(spec.columns.size());
  for (std::size_t j = 0; j < spec.columns.size(); ++j) {
    const auto& levels = spec.columns[j].levels;
    for (std::size_t l = 0; l < levels.size(); ++l) level_maps[j].emplace(levels[l], l);
  }

  std::map<std::string, std::size_t, std::less<>> seen_ids;
  std::size_t data_row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_record(line);
    if (fields.size() != header.size())
      throw Error(ErrorKind::MalformedRow, row_label(line_no) + ": expected " + std::to_string(header.size()) +
                                               " fields, found " + std::to_string(fields.size()));
    Unit u;
    u.row = data_row;
    u.id = id_pos ? fields[*id_pos] : std::to_string(data_row + 1);
    if (!seen_ids.emplace(u.id, data_row).second)
      throw Error(ErrorKind::MalformedRow, row_label(line_no) + ": duplicate id '" + u.id + "'");

    const std::string& code = fields[group_pos];
    if (code == spec.treated_code) u.group = Group::Treated;
    else if (code == spec.control_code) u.group = Group::Control;
    else
      throw Error(ErrorKind::MalformedRow, row_label(line_no) + ": group code '" + code + "' is neither '" +
                                               spec.treated_code + "' nor '" + spec.control_code + "'");

    for (std::size_t j = 0; j < spec.columns.size(); ++j) {
      const ColumnSpec& col = spec.columns[j];
      std::string_view raw = fields[cov_pos[j]];
      if (is_missing_token(raw)) {
        if (!col.missing_allowed)
          throw Error(ErrorKind::MalformedRow, row_label(line_no) + ": missing value in column '" + col.name + "'");
        u.covariates.emplace_back(Missing{});
        continue;
      }
      if (col.kind == ColumnKind::Numeric) {
        auto v = parse_double(raw);
        if (v) u.covariates.emplace_back(*v);
        else if (col.missing_allowed) u.covariates.emplace_back(Missing{});
        else
          throw Error(ErrorKind::MalformedRow, row_label(line_no) + ": '" + std::string(raw) +
                                                   "' is not numeric in column '" + col.name + "'");
      } else {
        auto& lm = level_maps[j];
        auto it = lm.find(raw);
        if (it == lm.end()) {
          if (!col.levels.empty())
            throw Error(ErrorKind::UnknownLevel, row_label(line_no) + ": level '" + std::string(raw) +
                                                     "' not declared for column '" + col.name + "'");
          it = lm.emplace(std::string(raw), data.spec.columns[j].levels.size()).first;
          data.spec.columns[j].levels.emplace_back(raw);
        }
        u.covariates.emplace_back(Level{it->second});
      }
    }

    if (outcome_pos) {
      std::string_view raw = fields[*outcome_pos];
      if (!is_missing_token(raw)) {
        auto v = parse_double(raw);
        if (!v)
          throw Error(ErrorKind::MalformedRow, row_label(line_no) + ": outcome '" + std::string(raw) + "' is not numeric");
        u.outcome = *v;
      }
    }

    (u.group == Group::Treated ? data.treated : data.controls).push_back(std::move(u));
    ++data_row;
  }

  if (data.treated.empty()) throw Error(ErrorKind::EmptyGroup, "no treated units");
  if (data.controls.empty()) throw Error(ErrorKind::EmptyGroup, "no control units");
  return data;
}

StudyData load_csv(const std::filesystem::path& path, const SchemaSpec& spec) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::BadConfig, "cannot open data file " + path.string());
  return read_csv(in, spec);
}

void write_csv(std::ostream& out, const StudyData& data) {
  const SchemaSpec& spec = data.spec;
  const std::string id_col = spec.id_column.empty() ? "" : spec.id_column;
  std::vector<std::string> header;
  if (!id_col.empty()) header.push_back(id_col);
  header.push_back(spec.group_column);
  for (const auto& c : spec.columns) header.push_back(c.name);
  if (!spec.outcome_column.empty()) header.push_back(spec.outcome_column);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << quote_if_needed(header[i]);
  out << '\n';

  std::vector<const Unit*> rows;
  for (const auto& u : data.treated) rows.push_back(&u);
  for (const auto& u : data.controls) rows.push_back(&u);
  std::sort(rows.begin(), rows.end(), [](const Unit* a, const Unit* b) { return a->row < b->row; });

  for (const Unit* u : rows) {
    bool first = true;
    auto put = [&](const std::string& s) {
      out << (first ? "" : ",") << s;
      first = false;
    };
    if (!id_col.empty()) put(quote_if_needed(u->id));
    put(u->group == Group::Treated ? spec.treated_code : spec.control_code);
    for (std::size_t j = 0; j < spec.columns.size(); ++j) {
      const auto& v = u->covariates[j];
      if (is_missing(v)) put("NA");
      else if (auto* d = std::get_if<double>(&v)) put(format_double(*d));
      else put(quote_if_needed(spec.columns[j].levels[std::get<Level>(v).index]));
    }
    if (!spec.outcome_column.empty()) put(u->outcome ? format_double(*u->outcome) : "NA");
    out << '\n';
  }
}

PairDifferences pair_differences(const std::vector<MatchedSet>& pairing, const StudyData& data) {
  PairDifferences d;
  d.y.reserve(pairing.size());
  for (const auto& set : pairing) {
    if (set.controls.size() != 1)
      throw Error(ErrorKind::BadParams, "pair differences need a 1-to-1 pairing");
    const Unit& t = data.treated.at(set.treated);
    const Unit& c = data.controls.at(set.controls.front());
    if (!t.outcome) throw Error(ErrorKind::MissingOutcome, "treated unit '" + t.id + "' has no outcome");
    if (!c.outcome) throw Error(ErrorKind::MissingOutcome, "control unit '" + c.id + "' has no outcome");
    d.y.push_back(*t.outcome - *c.outcome);
  }
  return d;
}

PairDifferences pair_differences(const MatchSolution& match, const StudyData& data) {
  if (match.ratio != 1) throw Error(ErrorKind::BadParams, "pair differences need a 1-to-1 match");
  return pair_differences(match.pairing, data);
}

SchemaSpec with_outcome(SchemaSpec spec, const std::string& outcome_column) {
  spec.outcome_column = outcome_column;
  return spec;
}

}  // namespace balmatch
