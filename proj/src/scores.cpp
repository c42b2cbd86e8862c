#include "balmatch/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "balmatch/error.hpp"
#include "balmatch/pairing.hpp"

namespace balmatch {

namespace {

std::vector<double> parse_numbers(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::BadParams, "bad number '" + item + "' in family parameters");
    }
  }
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

void validate(const family::UStat& f) {
  if (!(1 <= f.m_lo && f.m_lo <= f.m_hi && f.m_hi <= f.m))
    throw Error(ErrorKind::BadParams, "ustat needs 1 <= m_lo <= m_hi <= m");
}

void validate(const family::MStat& f) {
  if (!(0.0 <= f.inner && f.inner < f.outer && std::isfinite(f.outer)))
    throw Error(ErrorKind::BadParams, "mstat needs 0 <= inner < outer");
}

double log_choose(long n, long k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

StatFamily parse_family(const std::string& raw) {
  const std::string text = trim(raw);
  const auto colon = text.find(':');
  std::string name = text.substr(0, colon);
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (name == "sign") return family::Sign{};
  if (name == "wilcoxon") return family::Wilcoxon{};
  if (name == "permt" || name == "t") return family::PermT{};
  if (name == "ustat") {
    const auto v = parse_numbers(args);
    if (v.size() != 3) throw Error(ErrorKind::BadParams, "ustat needs three parameters m,m_lo,m_hi");
    for (double x : v)
      if (x != std::floor(x)) throw Error(ErrorKind::BadParams, "ustat parameters must be integers");
    family::UStat f{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
    validate(f);
    return f;
  }
  if (name == "mstat") {
    family::MStat f;
    if (!args.empty()) {
      const auto v = parse_numbers(args);
      if (v.size() != 2) throw Error(ErrorKind::BadParams, "mstat takes inner,outer");
      f.inner = v[0];
      f.outer = v[1];
    }
    validate(f);
    return f;
  }
  throw Error(ErrorKind::BadParams, "unknown statistic family '" + text + "'");
}

std::vector<StatFamily> parse_families(const std::string& text) {
  std::vector<StatFamily> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (!trim(item).empty()) out.push_back(parse_family(item));
  return out;
}

std::string to_string(const StatFamily& f) {
  struct {
    std::string operator()(const family::Sign&) const { return "sign"; }
    std::string operator()(const family::Wilcoxon&) const { return "wilcoxon"; }
    std::string operator()(const family::UStat& u) const {
      return "ustat:" + std::to_string(u.m) + "," + std::to_string(u.m_lo) + "," + std::to_string(u.m_hi);
    }
    std::string operator()(const family::PermT&) const { return "permt"; }
    std::string operator()(const family::MStat& m) const {
      std::ostringstream os;
      os << "mstat:" << m.inner << "," << m.outer;
      return os.str();
    }
  } visitor;
  return std::visit(visitor, f);
}

bool has_fixed_score_sum(const StatFamily& f) {
  return std::holds_alternative<family::Sign>(f) || std::holds_alternative<family::Wilcoxon>(f) ||
         std::holds_alternative<family::UStat>(f);
}

double ScoreVector::sum() const { return std::accumulate(q.begin(), q.end(), 0.0); }

double ScoreVector::sum_squares() const {
  double s = 0.0;
  for (double v : q) s += v * v;
  return s;
}

double ustat_score(long a, long n, const family::UStat& f) {
  const long m = f.m;
  const double denom = log_choose(n, m);
  double q = 0.0;
  for (long l = f.m_lo; l <= f.m_hi; ++l) {
    // C(a-1, l-1) * C(n-a, m-l), each zero outside 0 <= k <= n
    const long k1 = l - 1, n1 = a - 1, k2 = m - l, n2 = n - a;
    if (k1 < 0 || k1 > n1 || k2 < 0 || k2 > n2) continue;
    q += std::exp(log_choose(n1, k1) + log_choose(n2, k2) - denom);
  }
  return q;
}

ScoreVector compute_scores(const PairDifferences& d, const StatFamily& fam) {
  const auto& y = d.y;
  const std::size_t I = y.size();
  if (I < 2) throw Error(ErrorKind::BadParams, "scores need at least two pair differences");
  for (double v : y)
    if (!std::isfinite(v)) throw Error(ErrorKind::BadParams, "pair differences must be finite");

  ScoreVector s;
  s.family = fam;
  s.q.assign(I, 0.0);
  s.signs.resize(I);
  std::vector<std::size_t> nonzero;
  std::vector<double> abs_nz;
  for (std::size_t i = 0; i < I; ++i) {
    s.signs[i] = y[i] > 0.0 ? 1 : 0;
    if (y[i] != 0.0) {
      nonzero.push_back(i);
      abs_nz.push_back(std::abs(y[i]));
    }
  }
  const long n = static_cast<long>(nonzero.size());

  if (std::holds_alternative<family::Sign>(fam)) {
    for (std::size_t i : nonzero) s.q[i] = 1.0;
  } else if (std::holds_alternative<family::PermT>(fam)) {
    for (std::size_t i : nonzero) s.q[i] = std::abs(y[i]);
  } else if (const auto* mf = std::get_if<family::MStat>(&fam)) {
    validate(*mf);
    std::vector<double> abs_all(I);
    for (std::size_t i = 0; i < I; ++i) abs_all[i] = std::abs(y[i]);
    const double med = median(abs_all);
    if (!(med > 0.0)) throw Error(ErrorKind::DegenerateScores, "median |y| is zero");
    for (std::size_t i : nonzero) {
      const double r = std::abs(y[i]) / med;
      s.q[i] = r <= mf->inner ? 0.0 : r >= mf->outer ? 1.0 : (r - mf->inner) / (mf->outer - mf->inner);
    }
  } else {
    const auto ranks = midranks(abs_nz);
    if (std::holds_alternative<family::Wilcoxon>(fam)) {
      for (std::size_t k = 0; k < nonzero.size(); ++k) s.q[nonzero[k]] = ranks[k];
    } else {
      const auto& uf = std::get<family::UStat>(fam);
      validate(uf);
      if (uf.m >= n)
        throw Error(ErrorKind::BadParams, "ustat needs m < number of nonzero differences (" + std::to_string(n) + ")");
      const double center = (static_cast<double>(n) + 1.0) / 2.0;
      for (std::size_t k = 0; k < nonzero.size(); ++k) {
        double r = ranks[k];
        // half-integer midranks round toward the average rank
        if (r != std::floor(r)) r = r < center ? std::ceil(r) : std::floor(r);
        s.q[nonzero[k]] = ustat_score(static_cast<long>(r), n, uf);
      }
    }
  }
  return s;
}

double statistic_value(const ScoreVector& scores) {
  double t = 0.0;
  for (std::size_t i = 0; i < scores.q.size(); ++i)
    if (scores.signs[i]) t += scores.q[i];
  return t;
}

std::vector<std::pair<double, double>> normalized_weight_curve(const StatFamily& fam, int n) {
  if (n < 1) throw Error(ErrorKind::BadParams, "curve needs n >= 1");
  std::vector<double> q(static_cast<std::size_t>(n));
  if (std::holds_alternative<family::Sign>(fam)) {
    std::fill(q.begin(), q.end(), 1.0);
  } else if (std::holds_alternative<family::Wilcoxon>(fam)) {
    std::iota(q.begin(), q.end(), 1.0);
  } else if (const auto* uf = std::get_if<family::UStat>(&fam)) {
    validate(*uf);
    if (uf->m > n) throw Error(ErrorKind::BadParams, "curve needs n >= m");
    for (int a = 1; a <= n; ++a) q[static_cast<std::size_t>(a - 1)] = ustat_score(a, n, *uf);
  } else {
    throw Error(ErrorKind::BadParams, "weights of " + to_string(fam) + " depend on the data");
  }
  const double qmax = *std::max_element(q.begin(), q.end());
  std::vector<std::pair<double, double>> out;
  for (int a = 1; a <= n; ++a)
    out.emplace_back(static_cast<double>(a) / n, qmax > 0.0 ? q[static_cast<std::size_t>(a - 1)] / qmax : 0.0);
  return out;
}

}  // namespace balmatch
