#include "balmatch/error.hpp"

namespace balmatch {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::BadParams: return "BadParams";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::UnknownLevel: return "UnknownLevel";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::UnknownColumn: return "UnknownColumn";
    case ErrorKind::MissingOutcome: return "MissingOutcome";
    case ErrorKind::NotCategorical: return "NotCategorical";
    case ErrorKind::NotNumeric: return "NotNumeric";
    case ErrorKind::NegativeSlack: return "NegativeSlack";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::BadGrid: return "BadGrid";
    case ErrorKind::EmptyMatch: return "EmptyMatch";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::NodeLimitExceeded: return "NodeLimitExceeded";
    case ErrorKind::InfeasibleContradiction: return "InfeasibleContradiction";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::TooFewPairs: return "TooFewPairs";
    case ErrorKind::DegenerateScores: return "DegenerateScores";
    case ErrorKind::SupportTooLarge: return "SupportTooLarge";
    case ErrorKind::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorKind::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorKind::TooManyFamilies: return "TooManyFamilies";
    case ErrorKind::NoCrossing: return "NoCrossing";
  }
  return "Unknown";
}

}  // namespace balmatch
