#include "balmatch/power.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "balmatch/error.hpp"
#include "balmatch/parallel.hpp"
#include "balmatch/sens.hpp"

namespace balmatch {

namespace {
constexpr std::uint32_t kMul0 = 0xD2511F53, kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9, kWeyl1 = 0xBB67AE85;
}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

Philox4x32::result_type Philox4x32::operator()() {
  if (used_ == 4) {
    buffer_ = block(counter_, key_);
    if (++counter_[0] == 0) ++counter_[1];
    used_ = 0;
  }
  return buffer_[used_++];
}

DGP parse_dgp(const std::string& text, std::size_t sample_size, std::uint64_t seed) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::vector<double> args;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        args.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorKind::BadConfig, "bad number in dgp: " + text);
      }
    }
  }
  if (args.size() != 2) throw Error(ErrorKind::BadConfig, "dgp needs two parameters: " + text);
  DGP dgp;
  dgp.sample_size = sample_size;
  dgp.seed = seed;
  if (kind == "normal") {
    if (!(args[1] > 0.0)) throw Error(ErrorKind::BadConfig, "sigma must be positive");
    dgp.model = NormalShift{args[0], args[1]};
  } else if (kind == "t") {
    if (!(args[1] >= 1.0) || args[1] != std::floor(args[1])) throw Error(ErrorKind::BadConfig, "df must be an integer >= 1");
    dgp.model = TShift{args[0], static_cast<int>(args[1])};
  } else {
    throw Error(ErrorKind::BadConfig, "unknown dgp: " + text);
  }
  if (sample_size < 2) throw Error(ErrorKind::BadConfig, "sample size must be at least 2");
  return dgp;
}

std::vector<double> draw_differences(const DGP& dgp, std::uint64_t replication) {
  Philox4x32 rng(dgp.seed, replication);
  std::vector<double> y(dgp.sample_size);
  if (const auto* m = std::get_if<NormalShift>(&dgp.model)) {
    std::normal_distribution<double> noise(0.0, m->sigma);
    for (auto& v : y) v = m->tau + noise(rng);
  } else {
    const auto& t = std::get<TShift>(dgp.model);
    std::student_t_distribution<double> noise(t.df);
    for (auto& v : y) v = t.tau + noise(rng);
  }
  return y;
}

std::vector<SimulatedStatistic> simulate(const DGP& dgp, const StatFamily& family, std::size_t reps) {
  if (reps < 1) throw Error(ErrorKind::BadParams, "reps must be at least 1");
  std::vector<SimulatedStatistic> out(reps);
  parallel_for(reps, [&](std::size_t r) {
    const ScoreVector s = compute_scores(PairDifferences{draw_differences(dgp, r)}, family);
    out[r] = {statistic_value(s), s.sum(), s.sum_squares()};
  });
  return out;
}

PowerEstimate power_at(const std::vector<SimulatedStatistic>& sims, double gamma, double alpha) {
  const GammaModel model(gamma);
  std::size_t hits = 0;
  for (const auto& s : sims)
    if (s.sum_q2 > 0.0 && s.statistic >= critical_value(s.sum_q, s.sum_q2, model, alpha)) ++hits;
  PowerEstimate est;
  est.replications = sims.size();
  est.power = static_cast<double>(hits) / static_cast<double>(sims.size());
  est.std_error = std::sqrt(est.power * (1.0 - est.power) / static_cast<double>(sims.size()));
  return est;
}

PowerEstimate power_of_sensitivity(const DGP& dgp, const StatFamily& family, double gamma, double alpha,
                                   std::size_t reps) {
  return power_at(simulate(dgp, family, reps), gamma, alpha);
}

DesignSensitivity estimate_design_sensitivity(const DGP& dgp, const StatFamily& family, double alpha,
                                              std::size_t reps) {
  const auto sims = simulate(dgp, family, reps);
  auto power = [&](double g) { return power_at(sims, g, alpha).power; };
  if (power(1.0) < 0.5) throw Error(ErrorKind::NoCrossing, "power is below 0.5 at gamma = 1");
  double lo = 1.0, hi = 2.0;
  while (power(hi) >= 0.5) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw Error(ErrorKind::NoCrossing, "power stays above 0.5 for every gamma tried");
  }
  while (hi - lo > 1e-3 * lo) {
    const double mid = 0.5 * (lo + hi);
    (power(mid) >= 0.5 ? lo : hi) = mid;
  }
  return {0.5 * (lo + hi), lo, hi};
}

}  // namespace balmatch
