#include "balmatch/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <queue>
#include <stdexcept>

namespace balmatch::lp {

namespace {
constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-12;
constexpr double kPivotTol = 1e-9;
constexpr std::size_t kRefactorEvery = 64;
constexpr std::size_t kBlandAfter = 50;
}  // namespace

int Problem::add_row(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("row lower bound exceeds upper bound");
  row_lo_.push_back(lo);
  row_hi_.push_back(hi);
  return rows() - 1;
}

int Problem::add_column(double cost, double lo, double hi, std::vector<Entry> entries) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
    throw std::invalid_argument("column bounds must be finite with lo <= hi");
  for (const auto& e : entries)
    if (e.row < 0 || e.row >= rows()) throw std::out_of_range("column entry refers to a missing row");
  cost_.push_back(cost);
  col_lo_.push_back(lo);
  col_hi_.push_back(hi);
  columns_.push_back(std::move(entries));
  return cols() - 1;
}

DualSimplex::DualSimplex(const Problem& problem)
    : m_(problem.rows()), n_(problem.cols()), cost_(problem.cost()) {
  row_scale_.assign(static_cast<std::size_t>(m_), 0.0);
  for (int j = 0; j < n_; ++j)
    for (const auto& e : problem.column(j))
      row_scale_[static_cast<std::size_t>(e.row)] =
          std::max(row_scale_[static_cast<std::size_t>(e.row)], std::abs(e.value));
  for (auto& s : row_scale_) s = s > 0.0 ? 1.0 / s : 1.0;

  cols_.resize(static_cast<std::size_t>(n_));
  for (int j = 0; j < n_; ++j)
    for (const auto& e : problem.column(j))
      if (e.value != 0.0) cols_[static_cast<std::size_t>(j)].push_back({e.row, e.value * row_scale_[static_cast<std::size_t>(e.row)]});

  const auto total = static_cast<std::size_t>(n_ + m_);
  lo_.resize(total);
  hi_.resize(total);
  for (int j = 0; j < n_; ++j) {
    lo_[static_cast<std::size_t>(j)] = problem.col_lo()[static_cast<std::size_t>(j)];
    hi_[static_cast<std::size_t>(j)] = problem.col_hi()[static_cast<std::size_t>(j)];
  }
  for (int i = 0; i < m_; ++i) {
    const double s = row_scale_[static_cast<std::size_t>(i)];
    lo_[static_cast<std::size_t>(n_ + i)] = problem.row_lo()[static_cast<std::size_t>(i)] * s;
    hi_[static_cast<std::size_t>(n_ + i)] = problem.row_hi()[static_cast<std::size_t>(i)] * s;
  }
  cost_.resize(total, 0.0);
  base_cost_ = cost_;
  x_.assign(total, 0.0);
  d_.assign(total, 0.0);
  alpha_.assign(total, 0.0);
  head_.resize(static_cast<std::size_t>(m_));
  for (int i = 0; i < m_; ++i) head_[static_cast<std::size_t>(i)] = n_ + i;
  pos_.assign(total, -1);
  for (int i = 0; i < m_; ++i) pos_[static_cast<std::size_t>(n_ + i)] = i;
}

void DualSimplex::set_costs(const std::vector<double>& cost) {
  for (int j = 0; j < n_; ++j) base_cost_[static_cast<std::size_t>(j)] = cost[static_cast<std::size_t>(j)];
  cost_ = base_cost_;
}

void DualSimplex::set_column_bounds(const std::vector<double>& lo, const std::vector<double>& hi) {
  for (int j = 0; j < n_; ++j) {
    lo_[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)];
    hi_[static_cast<std::size_t>(j)] = hi[static_cast<std::size_t>(j)];
  }
}

void DualSimplex::load_basis(const std::vector<int>& head) {
  if (static_cast<int>(head.size()) != m_) throw std::invalid_argument("basis has the wrong size");
  std::fill(pos_.begin(), pos_.end(), -1);
  head_ = head;
  for (int i = 0; i < m_; ++i) pos_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] = i;
}

double DualSimplex::column_dot(const Eigen::VectorXd& rho, int var) const {
  if (var >= n_) return -rho(var - n_);
  double s = 0.0;
  for (const auto& e : cols_[static_cast<std::size_t>(var)]) s += rho(e.row) * e.value;
  return s;
}

Eigen::VectorXd DualSimplex::ftran(int var) const {
  if (var >= n_) return -binv_.col(var - n_);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m_);
  for (const auto& e : cols_[static_cast<std::size_t>(var)]) u += e.value * binv_.col(e.row);
  return u;
}

void DualSimplex::refactor() {
  since_refactor_ = 0;
  if (m_ == 0) {
    binv_.resize(0, 0);
    return;
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m_, m_);
  for (int i = 0; i < m_; ++i) {
    const int var = head_[static_cast<std::size_t>(i)];
    if (var >= n_) b(var - n_, i) = -1.0;
    else
      for (const auto& e : cols_[static_cast<std::size_t>(var)]) b(e.row, i) = e.value;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
  if (lu.isInvertible()) {
    binv_ = lu.inverse();
    return;
  }
  // Numerically singular basis: restart from the all-logical basis, which is
  // dual feasible because every structural column is boxed.
  std::vector<int> slack(static_cast<std::size_t>(m_));
  for (int i = 0; i < m_; ++i) slack[static_cast<std::size_t>(i)] = n_ + i;
  load_basis(slack);
  binv_ = -Eigen::MatrixXd::Identity(m_, m_);
}

void DualSimplex::compute_duals() {
  Eigen::VectorXd cb(m_);
  for (int i = 0; i < m_; ++i) cb(i) = cost_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])];
  const Eigen::VectorXd y = binv_.transpose() * cb;
  for (int v = 0; v < n_ + m_; ++v)
    d_[static_cast<std::size_t>(v)] = pos_[static_cast<std::size_t>(v)] >= 0 ? 0.0 : cost_[static_cast<std::size_t>(v)] - column_dot(y, v);
}

void DualSimplex::place_nonbasic() {
  for (int v = 0; v < n_ + m_; ++v) {
    const auto k = static_cast<std::size_t>(v);
    if (pos_[k] >= 0) continue;
    const bool has_lo = std::isfinite(lo_[k]);
    const bool has_hi = std::isfinite(hi_[k]);
    if (has_lo && has_hi) {
      const bool at_hi = x_[k] == hi_[k] && lo_[k] != hi_[k];
      if (at_hi) x_[k] = d_[k] <= kDualTol ? hi_[k] : lo_[k];
      else x_[k] = d_[k] >= -kDualTol ? lo_[k] : hi_[k];
    }
    else if (has_lo) x_[k] = lo_[k];
    else if (has_hi) x_[k] = hi_[k];
    else x_[k] = 0.0;
  }
}

void DualSimplex::compute_primal() {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
  for (int v = 0; v < n_ + m_; ++v) {
    const auto k = static_cast<std::size_t>(v);
    if (pos_[k] >= 0 || x_[k] == 0.0) continue;
    if (v >= n_) rhs(v - n_) += x_[k];  // column is -e_i
    else
      for (const auto& e : cols_[k]) rhs(e.row) -= e.value * x_[k];
  }
  const Eigen::VectorXd xb = binv_ * rhs;
  for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] = xb(i);
}

Status DualSimplex::solve(std::size_t max_iterations) {
  cost_ = base_cost_;
  shift_bound_ = 0.0;
  refactor();
  compute_duals();
  place_nonbasic();
  compute_primal();

  std::size_t degenerate = 0;
  bool fresh = true;  // factorization is exact since the last refactor
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    if (since_refactor_ >= kRefactorEvery) {
      refactor();
      compute_duals();
      place_nonbasic();
      compute_primal();
      fresh = true;
    }
    const bool bland = degenerate >= kBlandAfter;

    // leaving variable
    int r = -1;
    double worst = 0.0;
    int r_var = -1;
    for (int i = 0; i < m_; ++i) {
      const int var = head_[static_cast<std::size_t>(i)];
      const auto k = static_cast<std::size_t>(var);
      const double viol = std::max(lo_[k] - x_[k], x_[k] - hi_[k]);
      if (viol <= kPrimalTol) continue;
      if (bland ? (r_var < 0 || var < r_var) : viol > worst) {
        worst = viol;
        r = i;
        r_var = var;
      }
    }
    if (r < 0) {
      if (fresh) return Status::Optimal;
      since_refactor_ = kRefactorEvery;  // confirm on a fresh factorization
      continue;
    }

    const int leaving = head_[static_cast<std::size_t>(r)];
    const auto lk = static_cast<std::size_t>(leaving);
    const bool increase = x_[lk] < lo_[lk];
    const double target = increase ? lo_[lk] : hi_[lk];
    const Eigen::VectorXd rho = binv_.row(r).transpose();

    // dual ratio test (exact with smallest index under Bland)
    struct Cand {
      int var;
      double alpha;
      double ratio;
    };
    std::vector<Cand> cands;
    for (int v = 0; v < n_ + m_; ++v) {
      const auto k = static_cast<std::size_t>(v);
      if (pos_[k] >= 0) continue;
      const double alpha = column_dot(rho, v);
      alpha_[k] = alpha;
      if (lo_[k] == hi_[k] || std::abs(alpha) <= kPivotTol) continue;
      const bool at_lo = std::isfinite(lo_[k]) && x_[k] == lo_[k];
      const bool at_hi = std::isfinite(hi_[k]) && x_[k] == hi_[k];
      const bool free_var = !std::isfinite(lo_[k]) && !std::isfinite(hi_[k]);
      const double s_alpha = increase ? alpha : -alpha;
      const bool eligible = free_var || (at_lo && s_alpha < 0.0) || (at_hi && s_alpha > 0.0);
      if (!eligible) continue;
      const double dj = std::abs(d_[k]);
      const double ratio = (at_lo && d_[k] < 0.0) || (at_hi && d_[k] > 0.0) ? 0.0 : dj / std::abs(alpha);
      cands.push_back({v, alpha, ratio});
    }
    if (cands.empty()) {
      if (fresh) return Status::Infeasible;
      since_refactor_ = kRefactorEvery;
      continue;
    }
    const Cand* pick = nullptr;
    std::vector<int> flips;
    if (bland) {
      for (const auto& c : cands)
        if (!pick || c.ratio < pick->ratio || (c.ratio == pick->ratio && c.var < pick->var)) pick = &c;
    } else {
      // bound flipping: pass breakpoints while the dual slope stays positive,
      // then Harris among the rest
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.ratio < b.ratio; });
      double slope = std::abs(x_[lk] - target);
      std::size_t first = 0;
      for (; first + 1 < cands.size(); ++first) {
        const auto k = static_cast<std::size_t>(cands[first].var);
        const double width = hi_[k] - lo_[k];
        if (!std::isfinite(width)) break;
        const double next = slope - std::abs(cands[first].alpha) * width;
        if (next <= kPrimalTol) break;
        slope = next;
        flips.push_back(cands[first].var);
      }
      double theta_max = kInf;
      for (std::size_t i = first; i < cands.size(); ++i)
        theta_max = std::min(theta_max, (std::abs(d_[static_cast<std::size_t>(cands[i].var)]) + kDualTol) /
                                            std::abs(cands[i].alpha));
      for (std::size_t i = first; i < cands.size(); ++i)
        if (cands[i].ratio <= theta_max && (!pick || std::abs(cands[i].alpha) > std::abs(pick->alpha)))
          pick = &cands[i];
    }
    const int q = pick->var;
    const auto qk = static_cast<std::size_t>(q);
    const Eigen::VectorXd u = ftran(q);
    const double pivot = u(r);
    if (std::abs(pivot) <= kPivotTol) {
      since_refactor_ = kRefactorEvery;
      fresh = false;
      continue;
    }

    // an entering reduced cost of the wrong sign is shifted to zero so the
    // dual objective never decreases
    const bool q_at_lo = x_[qk] == lo_[qk];
    if (q < n_ && ((q_at_lo && d_[qk] < 0.0) || (!q_at_lo && d_[qk] > 0.0))) {
      cost_[qk] -= d_[qk];
      shift_bound_ += std::abs(d_[qk]) * std::max(std::abs(lo_[qk]), std::abs(hi_[qk]));
      d_[qk] = 0.0;
    }

    // dual update
    const double theta = d_[qk] / pick->alpha;
    if (theta != 0.0) {
      for (int v = 0; v < n_ + m_; ++v) {
        const auto k = static_cast<std::size_t>(v);
        if (pos_[k] >= 0) continue;
        if (alpha_[k] != 0.0) d_[k] -= theta * alpha_[k];
      }
    }
    d_[qk] = 0.0;
    d_[lk] = -theta;
    degenerate = std::abs(theta) < 1e-12 ? degenerate + 1 : 0;

    // primal update
    if (!flips.empty()) {
      Eigen::VectorXd moved = Eigen::VectorXd::Zero(m_);
      for (int v : flips) {
        const auto k = static_cast<std::size_t>(v);
        const double to = x_[k] == lo_[k] ? hi_[k] : lo_[k];
        const double dx = to - x_[k];
        x_[k] = to;
        if (v >= n_) moved(v - n_) -= dx;
        else
          for (const auto& e : cols_[k]) moved(e.row) += e.value * dx;
      }
      const Eigen::VectorXd dxb = binv_ * moved;
      for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] -= dxb(i);
    }
    const double step = (x_[lk] - target) / pivot;
    for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] -= step * u(i);
    x_[qk] += step;
    x_[lk] = target;

    // basis update
    head_[static_cast<std::size_t>(r)] = q;
    pos_[qk] = r;
    pos_[lk] = -1;
    binv_.row(r) /= pivot;
    for (int i = 0; i < m_; ++i)
      if (i != r && u(i) != 0.0) binv_.row(i) -= u(i) * binv_.row(r);

    ++since_refactor_;
    ++total_iterations_;
    fresh = false;
  }
  return Status::IterationLimit;
}

std::vector<double> DualSimplex::solution() const {
  return std::vector<double>(x_.begin(), x_.begin() + n_);
}

double DualSimplex::objective() const {
  double z = 0.0;
  for (int j = 0; j < n_; ++j) z += cost_[static_cast<std::size_t>(j)] * x_[static_cast<std::size_t>(j)];
  return z;
}

double DualSimplex::dual_bound(const std::vector<double>& cost) const {
  Eigen::VectorXd cb(m_);
  for (int i = 0; i < m_; ++i) cb(i) = cost_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])];
  const Eigen::VectorXd y = binv_.transpose() * cb;
  // for any feasible x: c'x = sum_j (c_j - y'a_j) x_j + sum_i y_i s_i
  double bound = 0.0;
  auto add = [&](double d, double lo, double hi) {
    if (d > 0.0) bound += d * lo;
    else if (d < 0.0) bound += d * hi;
  };
  for (int j = 0; j < n_; ++j) {
    const auto k = static_cast<std::size_t>(j);
    add(cost[k] - column_dot(y, j), lo_[k], hi_[k]);
  }
  for (int i = 0; i < m_; ++i) {
    const auto k = static_cast<std::size_t>(n_ + i);
    add(y(i), lo_[k], hi_[k]);
  }
  return std::isnan(bound) ? -kInf : bound;
}

namespace {

struct Node {
  double bound;
  std::size_t id;
  std::vector<std::pair<int, double>> fixings;
  std::shared_ptr<const std::vector<int>> basis;
};

struct NodeOrder {
  // priority_queue pops the "largest": smallest bound, then newest node
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id < b.id;
  }
};

}  // namespace

MipResult solve_binary(const Problem& problem, const BranchOptions& options, std::optional<Incumbent> warm,
                       const IntegralCheck& check, const RoundingHeuristic& rounding) {
  const double itol = options.integrality_tolerance;
  auto key = [&](double lp_value) {
    return options.integral_objective ? std::ceil(lp_value - 1e-6) : lp_value;
  };

  MipResult result;
  if (warm && !warm->x.empty()) {
    result.x = warm->x;
    result.objective = warm->objective;
  }
  auto cannot_improve = [&](double bound) {
    if (result.x.empty()) return false;
    if (options.integral_objective) return bound >= result.objective - 0.5;
    return bound >= result.objective - 1e-9 * std::max(1.0, std::abs(result.objective));
  };

  DualSimplex simplex(problem);
  double slack = 0.0;  // largest possible gap between perturbed and true LP values
  if (options.cost_perturbation > 0.0) {
    std::vector<double> cost = problem.cost();
    std::uint64_t state = 0;
    for (int j = 0; j < problem.cols(); ++j) {
      std::uint64_t h = state += 0x9E3779B97F4A7C15ull;
      h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
      h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
      h ^= h >> 31;
      const double eps = options.cost_perturbation * (1.0 + static_cast<double>(h >> 11) * 0x1.0p-53);
      const auto k = static_cast<std::size_t>(j);
      cost[k] += eps;
      slack += eps * std::max(std::abs(problem.col_lo()[k]), std::abs(problem.col_hi()[k]));
    }
    simplex.set_costs(cost);
  }
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::size_t next_id = 0;
  open.push(Node{-kInf, next_id++, {}, nullptr});

  std::vector<double> lo, hi;
  while (!open.empty()) {
    if (result.nodes >= options.node_limit) {
      result.status = MipStatus::NodeLimit;
      return result;
    }
    Node node = open.top();
    open.pop();
    if (cannot_improve(node.bound)) continue;
    ++result.nodes;

    lo = problem.col_lo();
    hi = problem.col_hi();
    for (auto [j, v] : node.fixings) lo[static_cast<std::size_t>(j)] = hi[static_cast<std::size_t>(j)] = v;
    simplex.set_column_bounds(lo, hi);
    if (node.basis) simplex.load_basis(*node.basis);
    const Status st = simplex.solve();
    if (st == Status::Infeasible) continue;
    if (st == Status::IterationLimit) throw std::runtime_error("LP iteration limit reached");

    const double bound = key(std::max(simplex.dual_bound(problem.cost()),
                                      simplex.objective() - slack - simplex.shift_bound()));
    if (cannot_improve(bound)) continue;
    const std::vector<double> x = simplex.solution();

    int branch = -1;
    double best_frac = 0.0;
    for (int j = 0; j < problem.cols(); ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (lo[k] == hi[k]) continue;
      const double frac = std::abs(x[k] - std::round(x[k]));
      if (frac > itol && frac > best_frac + 1e-12) {
        best_frac = frac;
        branch = j;
      }
    }
    auto offer = [&](std::vector<double> xr) {
      double z = 0.0;
      for (std::size_t k = 0; k < xr.size(); ++k) {
        xr[k] = std::round(xr[k]);
        z += problem.cost()[k] * xr[k];
      }
      if ((result.x.empty() || z < result.objective) && (!check || check(xr))) {
        result.x = std::move(xr);
        result.objective = z;
      }
    };
    if (branch < 0) {
      offer(x);
      continue;
    }
    if (rounding && (result.nodes <= 20 || result.nodes % 50 == 0)) {
      if (auto xr = rounding(x)) {
        offer(std::move(*xr));
        if (cannot_improve(bound)) continue;
      }
    }

    auto basis = std::make_shared<const std::vector<int>>(simplex.basis());
    for (double v : {0.0, 1.0}) {
      Node child{bound, next_id++, node.fixings, basis};
      child.fixings.emplace_back(branch, v);
      open.push(std::move(child));
    }
  }
  result.status = result.x.empty() ? MipStatus::Infeasible : MipStatus::Optimal;
  return result;
}

}  // namespace balmatch::lp
