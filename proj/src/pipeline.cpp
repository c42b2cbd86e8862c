#include "balmatch/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "balmatch/cardmatch.hpp"
#include "balmatch/error.hpp"
#include "balmatch/parallel.hpp"
#include "balmatch/scores.hpp"

namespace balmatch {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw Error(e, name);
  }
}

std::vector<std::string> numeric_columns(const StudyData& data) {
  std::vector<std::string> out;
  for (const auto& c : data.schema())
    if (c.kind == ColumnKind::Numeric) out.push_back(c.name);
  return out;
}

void analyze(PairingReport& pr, const std::vector<StatFamily>& families, const RunConfig& cfg) {
  const std::size_t G = cfg.gammas.size();
  pr.stats = heterogeneity(pr.y);
  for (const auto& fam : families) {
    const ScoreVector s = compute_scores(pr.y, fam);
    const double t = statistic_value(s);
    const std::string name = to_string(fam);
    std::vector<BoundRow> rows(G);
    parallel_for(G, [&](std::size_t g) {
      const GammaModel m(cfg.gammas[g]);
      rows[g] = {name, cfg.gammas[g], cfg.exact ? pvalue_bounds_exact(s, m, t) : pvalue_bounds_normal(s, m, t)};
    });
    pr.bounds.insert(pr.bounds.end(), rows.begin(), rows.end());
    pr.gamma_star.push_back(
        {name, sensitivity_value(s, t, cfg.alpha, cfg.exact ? BoundMethod::Exact : BoundMethod::Normal)});
    if (has_fixed_score_sum(fam)) {
      std::vector<HlRow> hl(G);
      parallel_for(G, [&](std::size_t g) {
        hl[g] = {name, cfg.gammas[g], hl_interval(pr.y, fam, GammaModel(cfg.gammas[g]))};
      });
      pr.hl.insert(pr.hl.end(), hl.begin(), hl.end());
    }
  }
  if (cfg.combine && families.size() >= 2) {
    for (double g : cfg.gammas) {
      const CorrectedPValue c = corrected_pvalue(pr.y, families, GammaModel(g));
      pr.combined.push_back({g, c.bound, c.error, c.min_single});
    }
  }
}

std::vector<double> default_lambdas(double gamma) {
  std::vector<double> out;
  for (double f : {1.1, 1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0}) out.push_back(gamma * f);
  return out;
}

}  // namespace

std::vector<std::size_t> histogram_counts(const std::vector<double>& values, const std::vector<double>& edges) {
  if (edges.size() < 2) return {};
  std::vector<std::size_t> counts(edges.size() - 1, 0);
  for (double v : values) {
    if (v < edges.front() || v > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin());
    bin = std::min(bin == 0 ? 0 : bin - 1, counts.size() - 1);
    ++counts[bin];
  }
  return counts;
}

StudyReport run_pipeline(const RunConfig& cfg) {
  StudyReport report;
  const auto families = stage("config", [&] { return parse_families(cfg.families); });

  const StudyData data = stage("load", [&] { return load_csv(cfg.data, load_schema(cfg.schema)); });
  const BalanceSpec spec = stage("balance", [&] { return load_balance(cfg.balance, data); });
  const std::vector<std::string> all_columns = cfg.all_columns.empty() ? numeric_columns(data) : cfg.all_columns;

  SolverOptions options;
  options.deterministic_seed = cfg.seed;
  options.exhaustive_ratio_scan = cfg.exhaustive_ratio_scan;
  const MatchSolution match = stage("match", [&] {
    MatchSolution m;
    if (cfg.enhanced) {
      std::vector<std::size_t> ts(data.treated.size()), cs(data.controls.size());
      for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = i;
      for (std::size_t i = 0; i < cs.size(); ++i) cs[i] = i;
      m = closest_largest_match(data, spec, robust_mahalanobis(data, ts, cs, all_columns), options);
    } else {
      m = escalate_ratio(data, spec, options);
    }
    if (m.empty()) throw Error(ErrorKind::Infeasible, "no balanced match exists");
    return m;
  });
  report.match = {match.selected_treated.size(), match.selected_controls.size(), match.ratio, match.certificate,
                  match.nodes};
  report.balance = evaluate(spec, match);

  std::vector<std::pair<std::string, std::vector<std::string>>> plans;
  if (cfg.pairing_columns.empty() || cfg.compare_pairings) plans.emplace_back("all", all_columns);
  if (!cfg.pairing_columns.empty()) plans.emplace_back("key", cfg.pairing_columns);

  for (const auto& [name, columns] : plans) {
    PairingReport pr;
    pr.name = name;
    pr.columns = columns;
    pr.pairing = stage("pair:" + name, [&] {
      return optimal_pairing(robust_mahalanobis(data, match, columns), match.ratio);
    });
    pr.y = stage("differences:" + name, [&] { return pair_differences(pr.pairing.pairs, data); });
    stage("sens:" + name, [&] {
      analyze(pr, families, cfg);
      return 0;
    });
    report.pairings.push_back(std::move(pr));
  }

  const std::size_t I = report.pairings.front().y.y.size();
  for (const auto& fam : families)
    if (has_fixed_score_sum(fam))
      report.weights.push_back({to_string(fam), normalized_weight_curve(fam, static_cast<int>(std::min<std::size_t>(I, 500)))});

  double lo = INFINITY, hi = -INFINITY;
  for (const auto& p : report.pairings)
    for (double v : p.y.y) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (hi <= lo) hi = lo + 1.0;
  for (int b = 0; b <= cfg.histogram_bins; ++b)
    report.histogram_edges.push_back(lo + (hi - lo) * b / cfg.histogram_bins);

  const double gstar = report.pairings.back().gamma_star.front().gamma_star;
  report.amplified_gamma = gstar;
  if (gstar > 1.0) {
    std::vector<double> lambdas;
    for (double l : cfg.lambdas.empty() ? default_lambdas(gstar) : cfg.lambdas)
      if (l > gstar) lambdas.push_back(l);
    report.amplification = stage("amplify", [&] { return amplify(gstar, lambdas); });
  }
  return report;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string report_json(const StudyReport& r) {
  json j;
  j["match"] = {{"treated", r.match.treated},
                {"controls", r.match.controls},
                {"ratio", r.match.ratio},
                {"certificate", std::string(to_string(r.match.certificate))},
                {"nodes", r.match.nodes}};
  json bal = json::array();
  for (const auto& b : r.balance)
    bal.push_back({{"label", b.label},
                   {"mean_imbalance", b.mean_imbalance},
                   {"tolerance", b.tolerance},
                   {"satisfied", b.satisfied}});
  j["balance"] = bal;
  json pairings = json::array();
  for (const auto& p : r.pairings) {
    json pj;
    pj["name"] = p.name;
    pj["columns"] = p.columns;
    pj["total_distance"] = p.pairing.total_distance;
    pj["pairs"] = p.y.y.size();
    pj["heterogeneity"] = {{"mean", p.stats.mean}, {"sd", p.stats.sd}, {"mad", p.stats.mad}};
    json bounds = json::array();
    for (const auto& b : p.bounds)
      bounds.push_back({{"family", b.family}, {"gamma", b.gamma}, {"lower", b.bound.lower}, {"upper", b.bound.upper}});
    pj["bounds"] = bounds;
    json hl = json::array();
    for (const auto& h : p.hl)
      hl.push_back({{"family", h.family},
                    {"gamma", h.gamma},
                    {"min", h.interval.min_estimate},
                    {"max", h.interval.max_estimate}});
    pj["hl"] = hl;
    json comb = json::array();
    for (const auto& c : p.combined)
      comb.push_back({{"gamma", c.gamma},
                      {"lower", c.bound.lower},
                      {"upper", c.bound.upper},
                      {"error", c.error},
                      {"min_single", c.min_single}});
    pj["combined"] = comb;
    json gs = json::array();
    for (const auto& g : p.gamma_star) gs.push_back({{"family", g.family}, {"gamma_star", g.gamma_star}});
    pj["gamma_star"] = gs;
    pairings.push_back(pj);
  }
  j["pairings"] = pairings;
  json amp = json::array();
  for (const auto& a : r.amplification) amp.push_back({{"lambda", a.lambda}, {"delta", a.delta}});
  j["amplification"] = {{"gamma", r.amplified_gamma}, {"points", amp}};
  return j.dump(2) + "\n";
}

namespace {

class Csv {
public:
  Csv(const fs::path& path, const std::string& header) : out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorKind::BadConfig, "cannot write " + path.string());
    out_ << header << '\n';
  }
  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

private:
  static std::string cell(const std::string& s) { return s.find(',') == std::string::npos ? s : '"' + s + '"'; }
  static std::string cell(const char* s) { return cell(std::string(s)); }
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "true" : "false"; }

  std::ofstream out_;
};

}  // namespace

void write_report(const StudyReport& r, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw Error(ErrorKind::BadConfig, "cannot write report.json");
    out << report_json(r);
  }
  Csv bal(dir / "balance.csv", "label,mean_imbalance,tolerance,satisfied");
  for (const auto& b : r.balance) bal.row(b.label, b.mean_imbalance, b.tolerance, b.satisfied);

  Csv het(dir / "heterogeneity.csv", "pairing,pairs,mean,sd,mad,total_distance");
  Csv bounds(dir / "bounds.csv", "pairing,family,gamma,lower,upper");
  Csv hl(dir / "hl.csv", "pairing,family,gamma,min,max");
  Csv comb(dir / "combined.csv", "pairing,gamma,lower,upper,error,min_single");
  Csv gs(dir / "gamma_star.csv", "pairing,family,gamma_star");
  Csv hist(dir / "histogram.csv", "pairing,bin_lo,bin_hi,count");
  for (const auto& p : r.pairings) {
    het.row(p.name, p.y.y.size(), p.stats.mean, p.stats.sd, p.stats.mad, p.pairing.total_distance);
    for (const auto& b : p.bounds) bounds.row(p.name, b.family, b.gamma, b.bound.lower, b.bound.upper);
    for (const auto& h : p.hl) hl.row(p.name, h.family, h.gamma, h.interval.min_estimate, h.interval.max_estimate);
    for (const auto& c : p.combined) comb.row(p.name, c.gamma, c.bound.lower, c.bound.upper, c.error, c.min_single);
    for (const auto& g : p.gamma_star) gs.row(p.name, g.family, g.gamma_star);
    const auto counts = histogram_counts(p.y.y, r.histogram_edges);
    for (std::size_t b = 0; b < counts.size(); ++b)
      hist.row(p.name, r.histogram_edges[b], r.histogram_edges[b + 1], counts[b]);
  }
  Csv w(dir / "weights.csv", "family,rank_fraction,weight");
  for (const auto& c : r.weights)
    for (const auto& [x, y] : c.points) w.row(c.family, x, y);
  Csv amp(dir / "amplification.csv", "gamma,lambda,delta");
  for (const auto& a : r.amplification) amp.row(a.gamma, a.lambda, a.delta);
}

}  // namespace balmatch
