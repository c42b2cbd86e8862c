#include "balmatch/config.hpp"

#include <cmath>
#include <fstream>
#include <algorithm>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace balmatch {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, what + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::BadConfig, std::string("bad value for '") + key + "'");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorKind::BadConfig, where + ": missing '" + key + "'");
  return get_or<T>(j, key, T{});
}

std::string scalar_text(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw Error(ErrorKind::BadConfig, "group codes must be strings or integers");
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::BadConfig, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SchemaSpec parse_schema(const std::string& text) {
  const json j = parse_json(text, "schema");
  if (!j.is_object()) throw Error(ErrorKind::BadConfig, "schema must be an object");
  SchemaSpec spec;
  spec.id_column = get_or<std::string>(j, "id", "");
  spec.outcome_column = get_or<std::string>(j, "outcome", "");
  if (j.contains("group")) {
    const json& g = j.at("group");
    if (g.is_string()) {
      spec.group_column = g.get<std::string>();
    } else if (g.is_object()) {
      spec.group_column = get_or<std::string>(g, "column", spec.group_column);
      if (g.contains("treated")) spec.treated_code = scalar_text(g.at("treated"));
      if (g.contains("control")) spec.control_code = scalar_text(g.at("control"));
    } else {
      throw Error(ErrorKind::BadConfig, "schema 'group' must be a string or object");
    }
  }
  if (spec.treated_code == spec.control_code) throw Error(ErrorKind::BadConfig, "treated and control codes coincide");
  if (!j.contains("columns") || !j.at("columns").is_object())
    throw Error(ErrorKind::BadConfig, "schema needs a 'columns' object");
  for (const auto& [name, c] : j.at("columns").items()) {
    ColumnSpec col;
    col.name = name;
    const std::string kind = get_or<std::string>(c, "kind", "numeric");
    if (kind == "numeric") col.kind = ColumnKind::Numeric;
    else if (kind == "categorical") col.kind = ColumnKind::Categorical;
    else throw Error(ErrorKind::BadConfig, "column " + name + ": unknown kind '" + kind + "'");
    col.levels = get_or<std::vector<std::string>>(c, "levels", {});
    if (col.kind == ColumnKind::Numeric && !col.levels.empty())
      throw Error(ErrorKind::BadConfig, "column " + name + ": numeric columns have no levels");
    col.missing_allowed = get_or<bool>(c, "missing_allowed", false);
    spec.columns.push_back(std::move(col));
  }
  return spec;
}

SchemaSpec load_schema(const fs::path& path) { return parse_schema(read_text(path)); }

BalanceSpec parse_balance(const std::string& text, const StudyData& data) {
  const json j = parse_json(text, "balance");
  if (!j.is_object() || !j.contains("constraints") || !j.at("constraints").is_array())
    throw Error(ErrorKind::BadConfig, "balance file needs a 'constraints' array");
  const bool add_missing = get_or<bool>(j, "balance_missingness", true);
  BalanceSpec spec;
  std::vector<std::string> numeric_used;
  auto note_numeric = [&](const std::string& c) {
    if (std::find(numeric_used.begin(), numeric_used.end(), c) == numeric_used.end()) numeric_used.push_back(c);
  };
  for (const auto& c : j.at("constraints")) {
    const std::string type = require<std::string>(c, "type", "constraint");
    if (type == "fine") {
      spec.add(fine_balance(data, require<std::string>(c, "column", type)));
    } else if (type == "near-fine") {
      spec.add(near_fine_balance(data, require<std::string>(c, "column", type), get_or<double>(c, "slack", 0.01)));
    } else if (type == "mean") {
      const auto col = require<std::string>(c, "column", type);
      spec.add(mean_balance(data, col, get_or<double>(c, "tolerance_sd", 0.05)));
      note_numeric(col);
    } else if (type == "moment") {
      const auto cols = require<std::vector<std::string>>(c, "columns", type);
      if (cols.size() != 2) throw Error(ErrorKind::BadConfig, "moment constraints take two columns");
      spec.add(moment_balance(data, cols[0], cols[1], get_or<double>(c, "tolerance", 0.05)));
      note_numeric(cols[0]);
      note_numeric(cols[1]);
    } else if (type == "quantile-grid") {
      const auto col = require<std::string>(c, "column", type);
      std::vector<double> grid;
      if (c.contains("grid")) grid = get_or<std::vector<double>>(c, "grid", {});
      else grid = prematch_quantiles(data, col, get_or<int>(c, "quantiles", 5));
      spec.add(quantile_grid_balance(data, col, grid, get_or<double>(c, "slack", 0.01)));
      note_numeric(col);
    } else {
      throw Error(ErrorKind::BadConfig, "unknown constraint type '" + type + "'");
    }
  }
  if (add_missing)
    for (const auto& col : numeric_used) spec.add(missingness_balance(data, col));
  return spec;
}

BalanceSpec load_balance(const fs::path& path, const StudyData& data) {
  return parse_balance(read_text(path), data);
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    const auto b = tok.find_first_not_of(" \t");
    const auto e = tok.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::BadConfig, "bad number '" + s + "' in grid '" + text + "'");
    }
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split_list(text, ':');
    if (parts.size() != 3) throw Error(ErrorKind::BadConfig, "range must be start:stop:step");
    const double a = number(parts[0]), b = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || b < a) throw Error(ErrorKind::BadConfig, "bad range '" + text + "'");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long i = 0; i <= n; ++i) {
      // round to the step's decimal precision so 1:2:0.1 gives 1.3, not 1.3000000000000003
      const double v = a + static_cast<double>(i) * step;
      out.push_back(std::round(v * 1e12) / 1e12);
    }
  } else {
    for (const auto& p : split_list(text, ',')) out.push_back(number(p));
  }
  if (out.empty()) throw Error(ErrorKind::BadConfig, "empty grid");
  return out;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadConfig:
    case ErrorKind::BadParams:
    case ErrorKind::UnknownColumn:
    case ErrorKind::NotCategorical:
    case ErrorKind::NotNumeric:
    case ErrorKind::NegativeSlack:
    case ErrorKind::BadGrid:
    case ErrorKind::UnsupportedFamily:
    case ErrorKind::LambdaOutOfRange:
    case ErrorKind::TooManyFamilies:
    case ErrorKind::SupportTooLarge:
    case ErrorKind::NoCrossing:
      return 2;
    case ErrorKind::MalformedRow:
    case ErrorKind::UnknownLevel:
    case ErrorKind::EmptyGroup:
    case ErrorKind::MissingOutcome:
    case ErrorKind::ZeroVariance:
    case ErrorKind::SingularCovariance:
    case ErrorKind::TooFewPairs:
    case ErrorKind::DegenerateScores:
      return 3;
    case ErrorKind::Infeasible:
    case ErrorKind::EmptyMatch:
    case ErrorKind::InfeasibleContradiction:
      return 4;
    case ErrorKind::NodeLimitExceeded:
    case ErrorKind::DimensionMismatch:
      return 5;
  }
  return 5;
}

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
  const json j = parse_json(text, "run config");
  if (!j.is_object()) throw Error(ErrorKind::BadConfig, "run config must be an object");
  auto path_of = [&](const char* key, bool required) -> fs::path {
    if (!j.contains(key)) {
      if (required) throw Error(ErrorKind::BadConfig, std::string("run config: missing '") + key + "'");
      return {};
    }
    fs::path p = get_or<std::string>(j, key, "");
    return p.is_absolute() ? p : base_dir / p;
  };
  auto grid_of = [&](const char* key, std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    if (j.at(key).is_string()) return parse_grid(j.at(key).get<std::string>());
    return get_or<std::vector<double>>(j, key, fallback);
  };
  auto columns_of = [&](const char* key) {
    if (!j.contains(key)) return std::vector<std::string>{};
    if (j.at(key).is_string()) return split_list(j.at(key).get<std::string>());
    return get_or<std::vector<std::string>>(j, key, {});
  };
  RunConfig cfg;
  cfg.data = path_of("data", true);
  cfg.schema = path_of("schema", true);
  cfg.balance = path_of("balance", true);
  cfg.pairing_columns = columns_of("pairing_columns");
  cfg.all_columns = columns_of("all_columns");
  cfg.compare_pairings = get_or<bool>(j, "compare_pairings", !cfg.pairing_columns.empty());
  cfg.families = get_or<std::string>(j, "families", cfg.families);
  cfg.gammas = grid_of("gammas", cfg.gammas);
  cfg.alpha = get_or<double>(j, "alpha", cfg.alpha);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  if (j.contains("output_dir")) cfg.output_dir = path_of("output_dir", false);
  cfg.lambdas = grid_of("lambdas", {});
  cfg.exact = get_or<bool>(j, "exact", false);
  cfg.combine = get_or<bool>(j, "combine", false);
  cfg.enhanced = get_or<bool>(j, "enhanced", false);
  cfg.exhaustive_ratio_scan = get_or<bool>(j, "exhaustive_ratio_scan", false);
  cfg.histogram_bins = get_or<int>(j, "histogram_bins", cfg.histogram_bins);

  for (double g : cfg.gammas)
    if (!(g >= 1.0)) throw Error(ErrorKind::BadConfig, "gamma values must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5)) throw Error(ErrorKind::BadConfig, "alpha must lie in (0, 0.5)");
  if (cfg.histogram_bins < 1) throw Error(ErrorKind::BadConfig, "histogram_bins must be positive");
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_text(path), fs::absolute(path).parent_path());
}

namespace {

json sets_json(const std::vector<MatchedSet>& sets, const StudyData& data) {
  json out = json::array();
  for (const auto& s : sets) {
    json controls = json::array();
    for (std::size_t c : s.controls) controls.push_back(data.controls[c].id);
    out.push_back({{"treated", data.treated[s.treated].id}, {"controls", controls}});
  }
  return out;
}

struct IdLookup {
  std::unordered_map<std::string, std::size_t> treated, controls;

  explicit IdLookup(const StudyData& data) {
    for (std::size_t i = 0; i < data.treated.size(); ++i) treated.emplace(data.treated[i].id, i);
    for (std::size_t i = 0; i < data.controls.size(); ++i) controls.emplace(data.controls[i].id, i);
  }
  static std::size_t find(const std::unordered_map<std::string, std::size_t>& m, const std::string& id) {
    const auto it = m.find(id);
    if (it == m.end()) throw Error(ErrorKind::BadConfig, "unit id '" + id + "' not in the data");
    return it->second;
  }
};

std::vector<MatchedSet> parse_sets(const json& arr, const StudyData& data) {
  const IdLookup ids(data);
  std::vector<MatchedSet> out;
  try {
    for (const auto& s : arr) {
      MatchedSet set;
      set.treated = IdLookup::find(ids.treated, s.at("treated").get<std::string>());
      for (const auto& c : s.at("controls")) set.controls.push_back(IdLookup::find(ids.controls, c.get<std::string>()));
      out.push_back(std::move(set));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, std::string("bad matched set: ") + e.what());
  }
  std::sort(out.begin(), out.end(), [](const MatchedSet& a, const MatchedSet& b) { return a.treated < b.treated; });
  return out;
}

}  // namespace

std::string match_file_json(const MatchFile& f, const StudyData& data) {
  json j;
  j["data"] = f.data.string();
  j["schema"] = f.schema.string();
  j["ratio"] = f.match.ratio;
  j["certificate"] = std::string(to_string(f.match.certificate));
  j["nodes"] = f.match.nodes;
  j["objective"] = f.match.objective;
  j["treated_count"] = f.match.selected_treated.size();
  j["control_count"] = f.match.selected_controls.size();
  j["total_distance"] = f.match.total_distance;
  json treated = json::array(), controls = json::array();
  for (std::size_t t : f.match.selected_treated) treated.push_back(data.treated[t].id);
  for (std::size_t c : f.match.selected_controls) controls.push_back(data.controls[c].id);
  j["treated"] = treated;
  j["controls"] = controls;
  json checks = json::array();
  for (const auto& c : f.checks)
    checks.push_back({{"label", c.label},
                      {"mean_imbalance", c.mean_imbalance},
                      {"tolerance", c.tolerance},
                      {"satisfied", c.satisfied}});
  j["balance"] = checks;
  j["sets"] = sets_json(f.match.pairing, data);
  return j.dump(2) + "\n";
}

MatchFile parse_match_file(const std::string& text, const StudyData& data) {
  const json j = parse_json(text, "match file");
  MatchFile f;
  f.data = require<std::string>(j, "data", "match file");
  f.schema = require<std::string>(j, "schema", "match file");
  f.match.ratio = require<int>(j, "ratio", "match file");
  const auto cert = get_or<std::string>(j, "certificate", "");
  f.match.certificate = cert == to_string(Certificate::ProvedOptimal) ? Certificate::ProvedOptimal
                        : cert == to_string(Certificate::Withheld)    ? Certificate::Withheld
                                                                      : Certificate::Infeasible;
  f.match.nodes = get_or<std::size_t>(j, "nodes", 0);
  f.match.total_distance = get_or<double>(j, "total_distance", 0.0);
  f.match.pairing = parse_sets(j.contains("sets") ? j.at("sets") : json::array(), data);
  for (const auto& s : f.match.pairing) {
    f.match.selected_treated.push_back(s.treated);
    for (std::size_t c : s.controls) f.match.selected_controls.push_back(c);
  }
  std::sort(f.match.selected_controls.begin(), f.match.selected_controls.end());
  f.match.objective = f.match.selected_controls.size();
  return f;
}

std::pair<fs::path, fs::path> read_source_paths(const fs::path& path) {
  const json j = parse_json(read_text(path), path.string());
  return {require<std::string>(j, "data", path.string()), require<std::string>(j, "schema", path.string())};
}

std::string pairs_file_json(const PairsFile& f, const StudyData& data) {
  json j;
  j["data"] = f.data.string();
  j["schema"] = f.schema.string();
  j["columns"] = f.columns;
  j["ratio"] = f.ratio;
  j["total_distance"] = f.pairing.total_distance;
  j["pairs"] = sets_json(f.pairing.pairs, data);
  return j.dump(2) + "\n";
}

PairsFile parse_pairs_file(const std::string& text, const StudyData& data) {
  const json j = parse_json(text, "pairs file");
  PairsFile f;
  f.data = require<std::string>(j, "data", "pairs file");
  f.schema = require<std::string>(j, "schema", "pairs file");
  f.columns = get_or<std::vector<std::string>>(j, "columns", {});
  f.ratio = get_or<int>(j, "ratio", 1);
  f.pairing.total_distance = get_or<double>(j, "total_distance", 0.0);
  f.pairing.pairs = parse_sets(j.contains("pairs") ? j.at("pairs") : json::array(), data);
  return f;
}

}  // namespace balmatch
