#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agepost {

enum class ErrorCode {
  InvalidArgument,
  DegenerateEvidence,
  FitDiverged,
  InsufficientPool,
  EmptySupport,
  NoEvidence,
  DimensionMismatch,
  NonFiniteLoss,
  LengthMismatch,
  DuplicateQuery,
  UnknownTask,
  TaskClosed,
  OutOfOrderReference,
  UnknownReference,
  QueueNotExhausted,
  DataError,
  IoError,
};

// Stable identifier used in wire-level error bodies and CLI messages.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

inline void require(bool cond, const std::string& detail) {
  if (!cond) throw Error(ErrorCode::InvalidArgument, detail);
}

}  // namespace agepost
