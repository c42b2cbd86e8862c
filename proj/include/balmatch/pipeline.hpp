#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "balmatch/balance.hpp"
#include "balmatch/config.hpp"
#include "balmatch/match.hpp"
#include "balmatch/multitest.hpp"
#include "balmatch/pairing.hpp"
#include "balmatch/sens.hpp"

namespace balmatch {

struct BoundRow {
  std::string family;
  double gamma = 1.0;
  PValueInterval bound;
};

struct HlRow {
  std::string family;
  double gamma = 1.0;
  EstimateInterval interval;
};

struct CombinedRow {
  double gamma = 1.0;
  PValueInterval bound;
  double error = 0.0;
  double min_single = 0.0;
};

struct SensitivityValue {
  std::string family;
  double gamma_star = 0.0;
};

struct PairingReport {
  std::string name;  // "all" or "key"
  std::vector<std::string> columns;
  PairedSample pairing;
  PairDifferences y;
  HeterogeneityStats stats;
  std::vector<BoundRow> bounds;
  std::vector<HlRow> hl;
  std::vector<CombinedRow> combined;
  std::vector<SensitivityValue> gamma_star;
};

struct MatchSummary {
  std::size_t treated = 0;
  std::size_t controls = 0;
  int ratio = 1;
  Certificate certificate = Certificate::Infeasible;
  std::size_t nodes = 0;
};

struct WeightCurve {
  std::string family;
  std::vector<std::pair<double, double>> points;
};

struct StudyReport {
  MatchSummary match;
  std::vector<BalanceCheck> balance;
  std::vector<PairingReport> pairings;
  std::vector<WeightCurve> weights;
  std::vector<double> histogram_edges;
  double amplified_gamma = 0.0;  // gamma* of the first family on the last pairing
  std::vector<AmplificationPoint> amplification;
};

/// Match, pair (on all covariates and, when given, on key covariates),
/// difference and run the sensitivity analysis. Errors carry the stage name.
StudyReport run_pipeline(const RunConfig& config);

std::string report_json(const StudyReport& report);

/// Writes report.json and one CSV per table into `dir`.
void write_report(const StudyReport& report, const std::filesystem::path& dir);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// Histogram counts for values over fixed edges; the last bin is closed.
std::vector<std::size_t> histogram_counts(const std::vector<double>& values, const std::vector<double>& edges);

}  // namespace balmatch
