#pragma once

#include <stdexcept>
#include <string>

namespace emcs {

enum class ErrorKind {
  kInvalidArgument,
  kRankDeficient,
  kDegenerateSample,
  kInsufficientUnits,
  kNoStrictPreference,
  kUndefined,
  kParse,
  kValidation,
  kIo,
  kFailureBudget,
};

const char* ErrorKindName(ErrorKind kind);

// Single exception type for the core; `kind` drives the C API status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace emcs
