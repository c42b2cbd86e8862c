#include "balmatch/cardmatch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "balmatch/error.hpp"
#include "balmatch/lp.hpp"

namespace balmatch {

namespace {

// Constraint values shifted by their overall mean. Adding a constant to f
// leaves every balance row unchanged because sum(u) = L * sum(s).
struct CenteredConstraint {
  std::vector<double> ft;
  std::vector<double> fc;
  double tolerance = 0.0;
  double range = 1.0;
};

std::vector<CenteredConstraint> center(const BalanceSpec& spec) {
  std::vector<CenteredConstraint> out;
  for (const auto& c : spec.constraints()) {
    CenteredConstraint cc;
    double sum = 0.0;
    double lo = lp::kInf, hi = -lp::kInf;
    for (const auto* v : {&c.treated_values, &c.control_values})
      for (double x : *v) {
        sum += x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    const double mean = sum / static_cast<double>(c.treated_values.size() + c.control_values.size());
    for (double x : c.treated_values) cc.ft.push_back(x - mean);
    for (double x : c.control_values) cc.fc.push_back(x - mean);
    cc.tolerance = c.tolerance;
    cc.range = hi > lo ? hi - lo : 1.0;
    out.push_back(std::move(cc));
  }
  return out;
}

bool selection_balanced(const BalanceSpec& spec, const std::vector<std::size_t>& treated,
                        const std::vector<std::size_t>& controls, int ratio) {
  if (treated.empty()) return controls.empty();
  if (controls.size() != treated.size() * static_cast<std::size_t>(ratio)) return false;
  for (const auto& c : spec.constraints())
    if (std::abs(subset_imbalance(c, treated, controls, ratio)) > c.tolerance + kBalanceSlack) return false;
  return true;
}

std::vector<MatchedSet> arbitrary_pairing(const std::vector<std::size_t>& treated,
                                          const std::vector<std::size_t>& controls, int ratio) {
  std::vector<MatchedSet> out;
  const auto l = static_cast<std::size_t>(ratio);
  for (std::size_t i = 0; i < treated.size(); ++i) {
    MatchedSet set{treated[i], {}};
    for (std::size_t k = 0; k < l; ++k) set.controls.push_back(controls[i * l + k]);
    out.push_back(std::move(set));
  }
  return out;
}

// Adds treated units in index order, each with the L unused controls that
// keep the constraints closest to satisfied; a unit whose group breaks a
// constraint is skipped.
std::optional<lp::Incumbent> greedy_incumbent(const MatchProblem& p, const std::vector<CenteredConstraint>& cons) {
  const std::size_t T = p.treated_count, C = p.control_count, K = cons.size();
  const auto L = static_cast<std::size_t>(p.ratio);
  const double Ld = static_cast<double>(p.ratio);
  std::vector<double> D(K, 0.0);
  std::vector<char> used(C, 0);
  std::vector<std::size_t> chosen_t, chosen_c;
  std::vector<double> trial(K);

  for (std::size_t t = 0; t < T; ++t) {
    const double pairs_after = Ld * static_cast<double>(chosen_t.size() + 1);
    std::vector<std::size_t> group;
    for (std::size_t k = 0; k < K; ++k) trial[k] = D[k] + Ld * cons[k].ft[t];
    for (std::size_t slot = 0; slot < L; ++slot) {
      const double pending = static_cast<double>(L - slot - 1);
      std::size_t best = C;
      double best_score = lp::kInf;
      for (std::size_t c = 0; c < C && best_score > 0.0; ++c) {
        if (used[c]) continue;
        double score = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const double d = trial[k] - cons[k].fc[c] - pending * cons[k].ft[t];
          const double excess = std::abs(d) - cons[k].tolerance * pairs_after;
          if (excess > 0.0) score += excess / cons[k].range;
        }
        if (score < best_score) {
          best_score = score;
          best = c;
        }
      }
      if (best == C) break;
      used[best] = 1;
      group.push_back(best);
      for (std::size_t k = 0; k < K; ++k) trial[k] -= cons[k].fc[best];
    }
    bool ok = group.size() == L;
    for (std::size_t k = 0; ok && k < K; ++k)
      ok = std::abs(trial[k]) <= cons[k].tolerance * pairs_after * (1.0 + 1e-12);
    if (ok) {
      chosen_t.push_back(t);
      chosen_c.insert(chosen_c.end(), group.begin(), group.end());
      D = trial;
    } else {
      for (std::size_t c : group) used[c] = 0;
    }
  }
  if (p.ratio >= 2 && chosen_t.size() < T) return std::nullopt;
  std::sort(chosen_c.begin(), chosen_c.end());
  if (!selection_balanced(p.spec, chosen_t, chosen_c, p.ratio)) return std::nullopt;
  lp::Incumbent inc;
  inc.x.assign(T + C, 0.0);
  for (std::size_t t : chosen_t) inc.x[t] = 1.0;
  for (std::size_t c : chosen_c) inc.x[T + c] = 1.0;
  inc.objective = -static_cast<double>(chosen_t.size());
  return inc;
}

// Keeps the units an LP point selects fully, drops fractional treated units,
// then adds, removes and swaps controls until the count is right and every
// constraint holds.
std::optional<std::vector<double>> repair_rounding(const MatchProblem& p, const std::vector<CenteredConstraint>& cons,
                                                   const std::vector<double>& x) {
  const std::size_t T = p.treated_count, C = p.control_count, K = cons.size();
  const double Ld = p.ratio;
  std::vector<char> in_t(T, 0), in_c(C, 0);
  std::size_t nt = 0, nc = 0;
  for (std::size_t t = 0; t < T; ++t)
    if (x[t] > 1.0 - 1e-6) in_t[t] = 1, ++nt;
  if (nt == 0 || (p.ratio >= 2 && nt < T)) return std::nullopt;
  for (std::size_t c = 0; c < C; ++c)
    if (x[T + c] > 1.0 - 1e-6) in_c[c] = 1, ++nc;

  std::vector<double> D(K, 0.0), limit(K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t t = 0; t < T; ++t)
      if (in_t[t]) D[k] += Ld * cons[k].ft[t];
    for (std::size_t c = 0; c < C; ++c)
      if (in_c[c]) D[k] -= cons[k].fc[c];
    limit[k] = (cons[k].tolerance + 0.5 * kBalanceSlack) * Ld * static_cast<double>(nt);
  }
  auto violation = [&](double sign_in, std::size_t c_in, double sign_out, std::size_t c_out) {
    double v = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double d = D[k];
      if (c_in < C) d -= sign_in * cons[k].fc[c_in];
      if (c_out < C) d -= sign_out * cons[k].fc[c_out];
      const double excess = std::abs(d) - limit[k];
      if (excess > 0.0) v += excess / cons[k].range;
    }
    return v;
  };
  auto best_change = [&](bool add, std::size_t other, double other_sign) {
    std::size_t best = C;
    double best_v = lp::kInf;
    for (std::size_t c = 0; c < C; ++c) {
      if (c == other || static_cast<bool>(in_c[c]) == add) continue;
      const double v = violation(add ? 1.0 : -1.0, c, other_sign, other);
      if (v < best_v) {
        best_v = v;
        best = c;
      }
    }
    return std::pair{best, best_v};
  };
  auto apply = [&](std::size_t c, bool add) {
    in_c[c] = add ? 1 : 0;
    for (std::size_t k = 0; k < K; ++k) D[k] += (add ? -1.0 : 1.0) * cons[k].fc[c];
    if (add) ++nc;
    else --nc;
  };

  const auto want = static_cast<std::size_t>(p.ratio) * nt;
  if (want > C) return std::nullopt;
  while (nc < want) apply(best_change(true, C, 0.0).first, true);
  while (nc > want) apply(best_change(false, C, 0.0).first, false);
  double current = violation(0.0, C, 0.0, C);
  for (int pass = 0; pass < 200 && current > 0.0; ++pass) {
    const auto [c_in, v_in] = best_change(true, C, 0.0);
    if (c_in == C) break;
    const auto [c_out, v_out] = best_change(false, c_in, 1.0);
    if (c_out == C || v_out >= current - 1e-12) break;
    apply(c_in, true);
    apply(c_out, false);
    current = v_out;
  }
  if (current > 0.0) return std::nullopt;
  std::vector<double> out(T + C, 0.0);
  for (std::size_t t = 0; t < T; ++t) out[t] = in_t[t];
  for (std::size_t c = 0; c < C; ++c) out[T + c] = in_c[c];
  return out;
}

void add_entry(std::vector<lp::Entry>& col, int row, double v) {
  if (v != 0.0) col.push_back({row, v});
}

}  // namespace

MatchProblem make_problem(const StudyData& data, const BalanceSpec& spec, int ratio) {
  MatchProblem p;
  p.treated_count = data.treated.size();
  p.control_count = data.controls.size();
  p.spec = spec;
  p.ratio = ratio;
  return p;
}

MatchSolution solve_subset_ilp(const MatchProblem& problem, const SolverOptions& options) {
  const std::size_t T = problem.treated_count, C = problem.control_count;
  const int L = problem.ratio;
  if (L < 1) throw Error(ErrorKind::BadParams, "ratio must be >= 1");
  if (T == 0 || C == 0) throw Error(ErrorKind::EmptyGroup, "matching needs treated and control units");
  for (const auto& c : problem.spec.constraints())
    if (c.treated_values.size() != T || c.control_values.size() != C)
      throw Error(ErrorKind::BadConfig, "constraint '" + c.label + "' does not fit the problem dimensions");

  MatchSolution sol;
  sol.ratio = L;
  if (static_cast<std::size_t>(L) * (L >= 2 ? T : 1) > C) {
    sol.certificate = Certificate::Infeasible;
    return sol;
  }

  const auto cons = center(problem.spec);
  const double Ld = L;

  lp::Problem lp;
  const int card_row = lp.add_row(0.0, 0.0);
  struct RowPair {
    int upper = -1;  // L*sum s (f - b) - sum u f <= 0, or the equality row when b = 0
    int lower = -1;  // L*sum s (f + b) - sum u f >= 0
  };
  std::vector<RowPair> rows;
  for (const auto& c : cons) {
    RowPair rp;
    if (c.tolerance == 0.0) {
      rp.upper = lp.add_row(0.0, 0.0);
    } else {
      rp.upper = lp.add_row(-lp::kInf, 0.0);
      rp.lower = lp.add_row(0.0, lp::kInf);
    }
    rows.push_back(rp);
  }
  const double s_lo = L >= 2 ? 1.0 : 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<lp::Entry> col;
    add_entry(col, card_row, -Ld);
    for (std::size_t k = 0; k < cons.size(); ++k) {
      add_entry(col, rows[k].upper, Ld * (cons[k].ft[t] - cons[k].tolerance));
      if (rows[k].lower >= 0) add_entry(col, rows[k].lower, Ld * (cons[k].ft[t] + cons[k].tolerance));
    }
    lp.add_column(-1.0, s_lo, 1.0, std::move(col));
  }
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<lp::Entry> col;
    add_entry(col, card_row, 1.0);
    for (std::size_t k = 0; k < cons.size(); ++k) {
      add_entry(col, rows[k].upper, -cons[k].fc[c]);
      if (rows[k].lower >= 0) add_entry(col, rows[k].lower, -cons[k].fc[c]);
    }
    lp.add_column(0.0, 0.0, 1.0, std::move(col));
  }

  auto split = [&](const std::vector<double>& x, std::vector<std::size_t>& st, std::vector<std::size_t>& sc) {
    st.clear();
    sc.clear();
    for (std::size_t t = 0; t < T; ++t)
      if (x[t] > 0.5) st.push_back(t);
    for (std::size_t c = 0; c < C; ++c)
      if (x[T + c] > 0.5) sc.push_back(c);
  };
  std::vector<std::size_t> st, sc;
  const lp::IntegralCheck check = [&](const std::vector<double>& x) {
    std::vector<std::size_t> a, b;
    split(x, a, b);
    return selection_balanced(problem.spec, a, b, L);
  };

  lp::BranchOptions bo;
  bo.integrality_tolerance = options.integrality_tolerance;
  bo.node_limit = options.node_limit;
  bo.integral_objective = true;
  const lp::RoundingHeuristic rounding = [&](const std::vector<double>& x) { return repair_rounding(problem, cons, x); };
  const lp::MipResult r = lp::solve_binary(lp, bo, greedy_incumbent(problem, cons), check, rounding);

  sol.nodes = r.nodes;
  if (!r.x.empty()) {
    split(r.x, st, sc);
    sol.selected_treated = st;
    sol.selected_controls = sc;
    sol.pairing = arbitrary_pairing(st, sc, L);
    sol.objective = st.size() * static_cast<std::size_t>(L);
  }
  if (r.status == lp::MipStatus::NodeLimit) sol.certificate = Certificate::Withheld;
  else if (r.status == lp::MipStatus::Infeasible || sol.objective == 0) sol.certificate = Certificate::Infeasible;
  else sol.certificate = Certificate::ProvedOptimal;
  return sol;
}

MatchSolution escalate_ratio(const StudyData& data, const BalanceSpec& spec, const SolverOptions& options) {
  const std::size_t T = data.treated.size(), C = data.controls.size();
  if (T == 0 || C == 0) throw Error(ErrorKind::EmptyGroup, "matching needs treated and control units");
  auto solve = [&](int L) {
    MatchSolution s = solve_subset_ilp(make_problem(data, spec, L), options);
    if (s.certificate == Certificate::Withheld)
      throw Error(ErrorKind::NodeLimitExceeded, "node limit reached at ratio " + std::to_string(L));
    return s;
  };
  MatchSolution best = solve(1);
  if (best.objective < T) return best;  // subset pair match, or nothing feasible

  const int max_ratio = static_cast<int>(C / T);
  for (int L = 2; L <= max_ratio; ++L) {
    MatchSolution s = solve(L);
    if (s.certificate == Certificate::ProvedOptimal) best = std::move(s);
    else if (!options.exhaustive_ratio_scan) break;
  }
  return best;
}

namespace {

MatchSolution closest_impl(const StudyData& data, const BalanceSpec& spec, const DistanceMatrix& distances,
                           std::size_t treated_count, int ratio, const SolverOptions& options,
                           const MatchSolution* seed) {
  for (std::size_t t : distances.treated_ids())
    if (t >= data.treated.size()) throw Error(ErrorKind::DimensionMismatch, "distance row outside the data");
  for (std::size_t c : distances.control_ids())
    if (c >= data.controls.size()) throw Error(ErrorKind::DimensionMismatch, "distance column outside the data");
  if (treated_count == 0) throw Error(ErrorKind::EmptyMatch, "closest match needs a positive size");
  const std::size_t R = distances.rows(), Cn = distances.cols();
  const auto cons = center(spec);
  const double pairs = static_cast<double>(treated_count) * ratio;

  lp::Problem lp;
  std::vector<int> row_link(R), col_cap(Cn);
  for (std::size_t r = 0; r < R; ++r) row_link[r] = lp.add_row(0.0, 0.0);
  for (std::size_t c = 0; c < Cn; ++c) col_cap[c] = lp.add_row(-lp::kInf, 1.0);
  const int size_row = lp.add_row(static_cast<double>(treated_count), static_cast<double>(treated_count));
  std::vector<int> bal_row;
  for (const auto& c : cons) {
    const double b = c.tolerance * pairs;
    bal_row.push_back(lp.add_row(-b, b));
  }

  struct Cell {
    std::size_t r, c;
  };
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < Cn; ++c) {
      const double eta = distances(r, c);
      if (!std::isfinite(eta)) continue;
      std::vector<lp::Entry> col;
      add_entry(col, row_link[r], 1.0);
      add_entry(col, col_cap[c], 1.0);
      const std::size_t t = distances.treated_ids()[r], k = distances.control_ids()[c];
      for (std::size_t j = 0; j < cons.size(); ++j) add_entry(col, bal_row[j], cons[j].ft[t] - cons[j].fc[k]);
      lp.add_column(eta, 0.0, 1.0, std::move(col));
      cells.push_back({r, c});
    }
  const bool all_treated = ratio >= 2;
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<lp::Entry> col;
    add_entry(col, row_link[r], -static_cast<double>(ratio));
    add_entry(col, size_row, 1.0);
    lp.add_column(0.0, all_treated ? 1.0 : 0.0, 1.0, std::move(col));
  }

  auto to_solution = [&](const std::vector<double>& x) {
    MatchSolution s;
    s.ratio = ratio;
    std::vector<MatchedSet> sets(R);
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (x[i] > 0.5) {
        sets[cells[i].r].controls.push_back(distances.control_ids()[cells[i].c]);
        s.total_distance += distances(cells[i].r, cells[i].c);
      }
    for (std::size_t r = 0; r < R; ++r) {
      if (sets[r].controls.empty()) continue;
      sets[r].treated = distances.treated_ids()[r];
      std::sort(sets[r].controls.begin(), sets[r].controls.end());
      s.selected_treated.push_back(sets[r].treated);
      for (std::size_t c : sets[r].controls) s.selected_controls.push_back(c);
      s.pairing.push_back(std::move(sets[r]));
    }
    std::sort(s.pairing.begin(), s.pairing.end(),
              [](const MatchedSet& a, const MatchedSet& b) { return a.treated < b.treated; });
    std::sort(s.selected_treated.begin(), s.selected_treated.end());
    std::sort(s.selected_controls.begin(), s.selected_controls.end());
    s.objective = s.selected_controls.size();
    return s;
  };
  const lp::IntegralCheck check = [&](const std::vector<double>& x) {
    MatchSolution s = to_solution(x);
    if (s.selected_treated.size() != treated_count) return false;
    for (const auto& set : s.pairing)
      if (set.controls.size() != static_cast<std::size_t>(ratio)) return false;
    return all_satisfied(evaluate(spec, s));
  };

  // The size-determining match, re-paired optimally, is a feasible incumbent.
  std::optional<lp::Incumbent> warm;
  if (seed && seed->selected_treated.size() == treated_count && seed->ratio == ratio) {
    std::vector<std::size_t> row_of(data.treated.size(), R), col_of(data.controls.size(), Cn);
    for (std::size_t r = 0; r < R; ++r) row_of[distances.treated_ids()[r]] = r;
    for (std::size_t c = 0; c < Cn; ++c) col_of[distances.control_ids()[c]] = c;
    bool covered = true;
    for (std::size_t t : seed->selected_treated) covered = covered && row_of[t] < R;
    for (std::size_t c : seed->selected_controls) covered = covered && col_of[c] < Cn;
    if (covered) {
      DistanceMatrix sub(seed->selected_treated, seed->selected_controls);
      for (std::size_t i = 0; i < sub.rows(); ++i)
        for (std::size_t j = 0; j < sub.cols(); ++j)
          sub(i, j) = distances(row_of[sub.treated_ids()[i]], col_of[sub.control_ids()[j]]);
      bool finite = std::all_of(sub.values().begin(), sub.values().end(), [](double v) { return std::isfinite(v); });
      if (finite) {
        const PairedSample paired = optimal_pairing(sub, ratio);
        std::vector<std::size_t> cell_of(R * Cn, cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) cell_of[cells[i].r * Cn + cells[i].c] = i;
        lp::Incumbent inc;
        inc.x.assign(cells.size() + R, 0.0);
        for (const auto& set : paired.pairs) {
          const std::size_t r = row_of[set.treated];
          inc.x[cells.size() + r] = 1.0;
          for (std::size_t c : set.controls) inc.x[cell_of[r * Cn + col_of[c]]] = 1.0;
        }
        inc.objective = 0.0;
        for (std::size_t i = 0; i < cells.size(); ++i) inc.objective += inc.x[i] * distances(cells[i].r, cells[i].c);
        if (check(inc.x)) warm = std::move(inc);
      }
    }
  }

  lp::BranchOptions bo;
  bo.integrality_tolerance = options.integrality_tolerance;
  bo.node_limit = options.node_limit;
  bo.integral_objective = false;
  lp::MipResult r = lp::solve_binary(lp, bo, warm, check);
  if (r.status == lp::MipStatus::Infeasible)
    throw Error(ErrorKind::InfeasibleContradiction,
                "no balanced match of " + std::to_string(treated_count) + " treated units at ratio " +
                    std::to_string(ratio) + " within the distance support");
  MatchSolution sol = r.x.empty() ? MatchSolution{} : to_solution(r.x);
  sol.ratio = ratio;
  sol.nodes = r.nodes;
  sol.certificate = r.status == lp::MipStatus::Optimal ? Certificate::ProvedOptimal : Certificate::Withheld;
  return sol;
}

}  // namespace

MatchSolution closest_match_of_size(const StudyData& data, const BalanceSpec& spec, const DistanceMatrix& distances,
                                    std::size_t treated_count, int ratio, const SolverOptions& options) {
  return closest_impl(data, spec, distances, treated_count, ratio, options, nullptr);
}

MatchSolution closest_largest_match(const StudyData& data, const BalanceSpec& spec, const DistanceMatrix& distances,
                                    const SolverOptions& options) {
  const MatchSolution sized = escalate_ratio(data, spec, options);
  if (sized.certificate != Certificate::ProvedOptimal) return sized;
  return closest_impl(data, spec, distances, sized.selected_treated.size(), sized.ratio, options, &sized);
}

}  // namespace balmatch
