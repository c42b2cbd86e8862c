#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "balmatch/cardmatch.hpp"
#include "balmatch/config.hpp"
#include "balmatch/multitest.hpp"
#include "balmatch/pairing.hpp"
#include "balmatch/pipeline.hpp"
#include "balmatch/power.hpp"
#include "balmatch/scores.hpp"
#include "balmatch/sens.hpp"

using namespace balmatch;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorKind::BadConfig, "cannot write " + out);
  f << text;
}

StudyData load_data(const fs::path& data, const fs::path& schema, const std::string& outcome = "") {
  SchemaSpec spec = load_schema(schema);
  if (!outcome.empty()) spec = with_outcome(spec, outcome);
  return load_csv(data, spec);
}

struct LoadedPairs {
  StudyData data;
  PairsFile file;
};

LoadedPairs load_pairs(const std::string& path, const std::string& outcome) {
  const auto [data_path, schema_path] = read_source_paths(path);
  StudyData data = load_data(data_path, schema_path, outcome);
  PairsFile file = parse_pairs_file(read_text(path), data);
  return {std::move(data), std::move(file)};
}

PairDifferences differences(const LoadedPairs& lp, bool lower_tail) {
  PairDifferences d = pair_differences(lp.file.pairing.pairs, lp.data);
  if (lower_tail)
    for (auto& v : d.y) v = -v;
  return d;
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardinality matching, re-pairing and sensitivity analysis for matched studies"};
  app.require_subcommand(1);

  // match
  auto* match_cmd = app.add_subcommand("match", "largest balanced match");
  std::string data_path, schema_path, balance_path, match_out = "match.json", dist_columns;
  bool enhanced = false, exhaustive = false;
  std::size_t node_limit = SolverOptions{}.node_limit;
  match_cmd->add_option("--data", data_path, "CSV data file")->required();
  match_cmd->add_option("--schema", schema_path, "schema JSON")->required();
  match_cmd->add_option("--balance", balance_path, "balance JSON")->required();
  match_cmd->add_flag("--enhanced", enhanced, "among largest matches, pick the closest");
  match_cmd->add_option("--columns", dist_columns, "distance columns for --enhanced (default: all numeric)");
  match_cmd->add_flag("--exhaustive-ratio-scan", exhaustive, "try every ratio instead of stopping at the first failure");
  match_cmd->add_option("--node-limit", node_limit, "branch-and-bound node limit");
  match_cmd->add_option("--out", match_out, "output file");

  // pair
  auto* pair_cmd = app.add_subcommand("pair", "optimal re-pairing of a match");
  std::string match_in, pair_columns, pairs_out = "pairs.json";
  pair_cmd->add_option("--match", match_in, "match.json")->required();
  pair_cmd->add_option("--columns", pair_columns, "comma-separated distance columns")->required();
  pair_cmd->add_option("--out", pairs_out, "output file");

  // shared by pairs-based commands
  std::string pairs_in, outcome, out;
  bool lower_tail = false;
  auto pairs_options = [&](CLI::App* cmd) {
    cmd->add_option("--pairs", pairs_in, "pairs.json")->required();
    cmd->add_option("--outcome", outcome, "outcome column (default: schema outcome)");
    cmd->add_option("--out", out, "output file (default: stdout)");
  };

  auto* stats_cmd = app.add_subcommand("stats", "pair-difference heterogeneity and histogram");
  int bins = 20;
  pairs_options(stats_cmd);
  stats_cmd->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);

  auto* scores_cmd = app.add_subcommand("scores", "score vector as CSV");
  std::string family_text = "wilcoxon";
  pairs_options(scores_cmd);
  scores_cmd->add_option("--family", family_text, "statistic family");

  auto* sens_cmd = app.add_subcommand("sens", "P-value bounds over a gamma grid");
  std::string families_text, gammas_text = "1", lambdas_text;
  double alpha = 0.05;
  bool exact = false, combine = false;
  pairs_options(sens_cmd);
  sens_cmd->add_option("--family", family_text, "statistic family");
  sens_cmd->add_option("--families", families_text, "';'-separated families");
  sens_cmd->add_option("--gammas", gammas_text, "a:b:step or list");
  sens_cmd->add_option("--alpha", alpha, "level for the sensitivity value");
  sens_cmd->add_flag("--exact", exact, "exact bounds instead of the normal approximation");
  sens_cmd->add_flag("--combine", combine, "correct the smallest bound for testing several statistics");
  sens_cmd->add_flag("--lower-tail", lower_tail, "test for a negative effect");

  auto* hl_cmd = app.add_subcommand("hl", "Hodges-Lehmann estimate intervals");
  pairs_options(hl_cmd);
  hl_cmd->add_option("--family", family_text, "statistic family");
  hl_cmd->add_option("--gammas", gammas_text, "a:b:step or list");

  auto* amp_cmd = app.add_subcommand("amplify", "amplification of a gamma");
  double gamma = 1.0;
  amp_cmd->add_option("--gamma", gamma, "gamma")->required();
  amp_cmd->add_option("--lambdas", lambdas_text, "a:b:step or list")->required();
  amp_cmd->add_option("--out", out, "output file (default: stdout)");

  auto* power_cmd = app.add_subcommand("power", "simulated power of a sensitivity analysis");
  std::string dgp_text;
  std::size_t n = 5000, reps = 500;
  std::uint64_t seed = 0;
  bool design = false;
  power_cmd->add_option("--dgp", dgp_text, "normal:tau,sigma or t:tau,df")->required();
  power_cmd->add_option("--family", family_text, "statistic family");
  power_cmd->add_option("--gamma", gammas_text, "gamma value or grid");
  power_cmd->add_option("--n", n, "pairs per replication");
  power_cmd->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
  power_cmd->add_option("--seed", seed, "random seed")->required();
  power_cmd->add_option("--alpha", alpha, "level");
  power_cmd->add_flag("--design-sensitivity", design, "also estimate the design sensitivity");
  power_cmd->add_option("--out", out, "output file (default: stdout)");

  auto* report_cmd = app.add_subcommand("report", "full pipeline from a run file");
  std::string run_path, out_dir;
  report_cmd->add_option("--config", run_path, "run JSON")->required();
  report_cmd->add_option("--out-dir", out_dir, "output directory (overrides the run file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*match_cmd) {
      const StudyData data = load_data(data_path, schema_path);
      const BalanceSpec spec = load_balance(balance_path, data);
      SolverOptions options;
      options.node_limit = node_limit;
      options.exhaustive_ratio_scan = exhaustive;
      MatchSolution m;
      if (enhanced) {
        std::vector<std::size_t> ts(data.treated.size()), cs(data.controls.size());
        for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = i;
        for (std::size_t i = 0; i < cs.size(); ++i) cs[i] = i;
        std::vector<std::string> cols = split_list(dist_columns);
        if (cols.empty())
          for (const auto& c : data.schema())
            if (c.kind == ColumnKind::Numeric) cols.push_back(c.name);
        m = closest_largest_match(data, spec, robust_mahalanobis(data, ts, cs, cols), options);
      } else {
        m = escalate_ratio(data, spec, options);
      }
      MatchFile file{absolute(data_path), absolute(schema_path), m, evaluate(spec, m)};
      emit(match_file_json(file, data), match_out);
      if (m.empty()) {
        std::cerr << "no balanced match exists\n";
        return exit_code(ErrorKind::Infeasible);
      }
      return 0;
    }
    if (*pair_cmd) {
      const auto [dp, sp] = read_source_paths(match_in);
      const StudyData data = load_data(dp, sp);
      const MatchFile mf = parse_match_file(read_text(match_in), data);
      PairsFile pf;
      pf.data = dp;
      pf.schema = sp;
      pf.columns = split_list(pair_columns);
      pf.ratio = mf.match.ratio;
      pf.pairing = optimal_pairing(robust_mahalanobis(data, mf.match, pf.columns), mf.match.ratio);
      emit(pairs_file_json(pf, data), pairs_out);
      return 0;
    }
    if (*stats_cmd) {
      const LoadedPairs lp = load_pairs(pairs_in, outcome);
      const PairDifferences d = differences(lp, false);
      const HeterogeneityStats h = heterogeneity(d);
      const auto [lo, hi] = std::minmax_element(d.y.begin(), d.y.end());
      std::vector<double> edges;
      const double top = *hi > *lo ? *hi : *lo + 1.0;
      for (int b = 0; b <= bins; ++b) edges.push_back(*lo + (top - *lo) * b / bins);
      const auto counts = histogram_counts(d.y, edges);
      json j;
      j["pairs"] = d.y.size();
      j["mean"] = h.mean;
      j["sd"] = h.sd;
      j["mad"] = h.mad;
      json hist = json::array();
      for (std::size_t b = 0; b < counts.size(); ++b) hist.push_back({{"lo", edges[b]}, {"hi", edges[b + 1]}, {"count", counts[b]}});
      j["histogram"] = hist;
      emit(j.dump(2) + "\n", out);
      return 0;
    }
    if (*scores_cmd) {
      const LoadedPairs lp = load_pairs(pairs_in, outcome);
      const PairDifferences d = differences(lp, false);
      const ScoreVector s = compute_scores(d, parse_family(family_text));
      std::string text = "treated,control,y,q,positive\n";
      for (std::size_t i = 0; i < d.y.size(); ++i) {
        const auto& set = lp.file.pairing.pairs[i];
        text += lp.data.treated[set.treated].id + "," + lp.data.controls[set.controls.front()].id + "," +
                format_number(d.y[i]) + "," + format_number(s.q[i]) + "," + (s.signs[i] ? "1" : "0") + "\n";
      }
      emit(text, out);
      return 0;
    }
    if (*sens_cmd) {
      const LoadedPairs lp = load_pairs(pairs_in, outcome);
      const PairDifferences d = differences(lp, lower_tail);
      const auto fams = parse_families(families_text.empty() ? family_text : families_text);
      const auto gammas = parse_grid(gammas_text);
      json j;
      j["pairs"] = d.y.size();
      j["families"] = json::array();
      for (const auto& f : fams) j["families"].push_back(to_string(f));
      json rows = json::array();
      std::vector<ScoreVector> scores;
      std::vector<double> observed;
      for (const auto& f : fams) {
        scores.push_back(compute_scores(d, f));
        observed.push_back(statistic_value(scores.back()));
      }
      for (double g : gammas) {
        const GammaModel m(g);
        json row;
        row["gamma"] = g;
        for (std::size_t k = 0; k < fams.size(); ++k) {
          const PValueInterval b =
              exact ? pvalue_bounds_exact(scores[k], m, observed[k]) : pvalue_bounds_normal(scores[k], m, observed[k]);
          row[to_string(fams[k])] = {{"lower", b.lower}, {"upper", b.upper}};
        }
        if (combine && fams.size() >= 2) {
          const CorrectedPValue c = corrected_pvalue(d, fams, m);
          row["combined"] = {{"upper", c.bound.upper}, {"lower", c.bound.lower}, {"error", c.error}};
        }
        rows.push_back(row);
      }
      j["rows"] = rows;
      json gs;
      for (std::size_t k = 0; k < fams.size(); ++k)
        gs[to_string(fams[k])] =
            sensitivity_value(scores[k], observed[k], alpha, exact ? BoundMethod::Exact : BoundMethod::Normal);
      j["alpha"] = alpha;
      j["gamma_star"] = gs;
      emit(j.dump(2) + "\n", out);
      return 0;
    }
    if (*hl_cmd) {
      const LoadedPairs lp = load_pairs(pairs_in, outcome);
      const PairDifferences d = differences(lp, false);
      const StatFamily fam = parse_family(family_text);
      json rows = json::array();
      for (double g : parse_grid(gammas_text)) {
        const EstimateInterval e = hl_interval(d, fam, GammaModel(g));
        rows.push_back({{"gamma", g}, {"min", e.min_estimate}, {"max", e.max_estimate}});
      }
      json j;
      j["family"] = to_string(fam);
      j["rows"] = rows;
      emit(j.dump(2) + "\n", out);
      return 0;
    }
    if (*amp_cmd) {
      std::string text = "lambda,delta,gamma\n";
      for (const auto& p : amplify(gamma, parse_grid(lambdas_text)))
        text += format_number(p.lambda) + "," + format_number(p.delta) + "," + format_number(p.gamma) + "\n";
      emit(text, out);
      return 0;
    }
    if (*power_cmd) {
      const DGP dgp = parse_dgp(dgp_text, n, seed);
      const StatFamily fam = parse_family(family_text);
      const auto sims = simulate(dgp, fam, reps);
      json rows = json::array();
      for (double g : parse_grid(gammas_text)) {
        const PowerEstimate p = power_at(sims, g, alpha);
        rows.push_back({{"gamma", g}, {"power", p.power}, {"std_error", p.std_error}, {"replications", p.replications}});
      }
      json j;
      j["dgp"] = dgp_text;
      j["family"] = to_string(fam);
      j["pairs"] = n;
      j["seed"] = seed;
      j["rows"] = rows;
      if (design) {
        const DesignSensitivity ds = estimate_design_sensitivity(dgp, fam, alpha, reps);
        j["design_sensitivity"] = {{"estimate", ds.estimate}, {"bracket", {ds.bracket_lo, ds.bracket_hi}}};
      }
      emit(j.dump(2) + "\n", out);
      return 0;
    }
    if (*report_cmd) {
      RunConfig cfg = load_run_config(run_path);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      const StudyReport r = run_pipeline(cfg);
      write_report(r, cfg.output_dir);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 5;
  }
  return 0;
}
