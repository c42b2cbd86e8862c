#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "balmatch/scores.hpp"

namespace balmatch {

/// Philox4x32-10 counter-based generator. Each (seed, stream) pair is an
/// independent sequence, so replication r draws the same numbers whatever
/// thread runs it.
class Philox4x32 {
public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// One block of the raw bijection, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned used_ = 4;
};

struct NormalShift {
  double tau = 0.5;
  double sigma = 1.0;
};
/// tau + t-distributed noise with df degrees of freedom.
struct TShift {
  double tau = 1.0;
  int df = 4;
};

struct DGP {
  std::variant<NormalShift, TShift> model;
  std::size_t sample_size = 5000;
  std::uint64_t seed = 0;
};

/// "normal:tau,sigma" or "t:tau,df".
DGP parse_dgp(const std::string& text, std::size_t sample_size, std::uint64_t seed);

struct PowerEstimate {
  double power = 0.0;
  std::size_t replications = 0;
  double std_error = 0.0;
};

/// Per-replication summaries; the bound only needs T, sum q and sum q^2.
struct SimulatedStatistic {
  double statistic = 0.0;
  double sum_q = 0.0;
  double sum_q2 = 0.0;
};

std::vector<double> draw_differences(const DGP& dgp, std::uint64_t replication);

std::vector<SimulatedStatistic> simulate(const DGP& dgp, const StatFamily& family, std::size_t reps);

/// Share of replications rejecting at level alpha under the gamma bound.
PowerEstimate power_at(const std::vector<SimulatedStatistic>& sims, double gamma, double alpha);

PowerEstimate power_of_sensitivity(const DGP& dgp, const StatFamily& family, double gamma, double alpha,
                                   std::size_t reps);

struct DesignSensitivity {
  double estimate = 0.0;
  double bracket_lo = 0.0;  // power >= 0.5 here
  double bracket_hi = 0.0;  // power < 0.5 here
};

/// Gamma where the simulated power falls through 0.5. All gammas share the
/// same replications.
DesignSensitivity estimate_design_sensitivity(const DGP& dgp, const StatFamily& family, double alpha,
                                              std::size_t reps);

}  // namespace balmatch
