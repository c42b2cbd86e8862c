#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace balmatch {

enum class ErrorKind {
  // configuration
  BadConfig,
  BadParams,
  // ingestion
  MalformedRow,
  UnknownLevel,
  EmptyGroup,
  UnknownColumn,
  MissingOutcome,
  // balance
  NotCategorical,
  NotNumeric,
  NegativeSlack,
  ZeroVariance,
  BadGrid,
  EmptyMatch,
  // matching
  Infeasible,
  NodeLimitExceeded,
  InfeasibleContradiction,
  // pairing
  SingularCovariance,
  DimensionMismatch,
  TooFewPairs,
  // inference
  DegenerateScores,
  SupportTooLarge,
  UnsupportedFamily,
  LambdaOutOfRange,
  TooManyFamilies,
  NoCrossing,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind; the CLI maps kinds to exit codes.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  /// Same error, tagged with the pipeline stage it came from.
  Error(const Error& inner, const std::string& stage)
      : std::runtime_error("[" + stage + "] " + inner.what()), kind_(inner.kind()), stage_(stage) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }

private:
  ErrorKind kind_;
  std::string stage_;
};

}  // namespace balmatch
