#include "error.hpp"

namespace emcs {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kRankDeficient: return "rank_deficient";
    case ErrorKind::kDegenerateSample: return "degenerate_sample";
    case ErrorKind::kInsufficientUnits: return "insufficient_units";
    case ErrorKind::kNoStrictPreference: return "no_strict_preference";
    case ErrorKind::kUndefined: return "undefined";
    case ErrorKind::kParse: return "parse_error";
    case ErrorKind::kValidation: return "validation_error";
    case ErrorKind::kIo: return "io_error";
    case ErrorKind::kFailureBudget: return "failure_budget_exceeded";
  }
  return "unknown";
}

}  // namespace emcs
