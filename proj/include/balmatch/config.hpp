#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "balmatch/balance.hpp"
#include "balmatch/data.hpp"
#include "balmatch/error.hpp"
#include "balmatch/match.hpp"
#include "balmatch/pairing.hpp"

namespace balmatch {

/// Schema file:
///   {"id": "sid", "group": {"column": "group", "treated": "1", "control": "0"},
///    "outcome": "total06",
///    "columns": {"gender": {"kind": "categorical", "levels": ["M", "F"]},
///                "math04": {"kind": "numeric", "missing_allowed": true}}}
SchemaSpec parse_schema(const std::string& json_text);
SchemaSpec load_schema(const std::filesystem::path& path);

/// Balance file:
///   {"constraints": [
///      {"type": "fine", "column": "gender"},
///      {"type": "near-fine", "column": "school", "slack": 0.01},
///      {"type": "mean", "column": "math04", "tolerance_sd": 0.05},
///      {"type": "moment", "columns": ["math04", "lang04"], "tolerance": 0.05},
///      {"type": "quantile-grid", "column": "math04", "quantiles": 5, "slack": 0.02}],
///    "balance_missingness": true}
/// A quantile-grid entry takes either explicit "grid" cut points or a number
/// of pre-match "quantiles". Numeric columns used by mean, moment and
/// quantile-grid entries also get a fine-balance constraint on their
/// missingness indicator unless balance_missingness is false.
BalanceSpec parse_balance(const std::string& json_text, const StudyData& data);
BalanceSpec load_balance(const std::filesystem::path& path, const StudyData& data);

/// "a:b:step" (inclusive of b within rounding) or a comma-separated list.
std::vector<double> parse_grid(const std::string& text);
std::vector<std::string> split_list(const std::string& text, char sep = ',');

/// Process exit code for an error kind: 2 configuration, 3 data,
/// 4 infeasible match, 5 solver failure.
int exit_code(ErrorKind kind);

struct RunConfig {
  std::filesystem::path data;
  std::filesystem::path schema;
  std::filesystem::path balance;
  std::vector<std::string> pairing_columns;  // key covariates
  std::vector<std::string> all_columns;      // empty: every numeric schema column
  bool compare_pairings = true;
  std::string families = "wilcoxon";
  std::vector<double> gammas{1.0};
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "report";
  std::vector<double> lambdas;  // empty: a default grid above gamma*
  bool exact = false;
  bool combine = false;
  bool enhanced = false;
  bool exhaustive_ratio_scan = false;
  int histogram_bins = 20;
};

/// Run file: a JSON object with keys data, schema, balance, pairing_columns,
/// all_columns, compare_pairings, families, gammas, alpha, seed, output_dir,
/// lambdas, exact, combine, enhanced, exhaustive_ratio_scan, histogram_bins.
/// Relative paths resolve against the run file's directory.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Persisted output of `balmatch match`.
struct MatchFile {
  std::filesystem::path data;
  std::filesystem::path schema;
  MatchSolution match;
  std::vector<BalanceCheck> checks;
};

/// Persisted output of `balmatch pair`.
struct PairsFile {
  std::filesystem::path data;
  std::filesystem::path schema;
  std::vector<std::string> columns;
  int ratio = 1;
  PairedSample pairing;
};

std::string match_file_json(const MatchFile& file, const StudyData& data);
MatchFile parse_match_file(const std::string& json_text, const StudyData& data);
/// Reads only the data and schema paths from a match or pairs file.
std::pair<std::filesystem::path, std::filesystem::path> read_source_paths(const std::filesystem::path& path);

std::string pairs_file_json(const PairsFile& file, const StudyData& data);
PairsFile parse_pairs_file(const std::string& json_text, const StudyData& data);

std::string read_text(const std::filesystem::path& path);

}  // namespace balmatch
