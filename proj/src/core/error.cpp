#include "agepost/error.hpp"

namespace agepost {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateEvidence: return "DegenerateEvidence";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::InsufficientPool: return "InsufficientPool";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::NoEvidence: return "NoEvidence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DuplicateQuery: return "DuplicateQuery";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::TaskClosed: return "TaskClosed";
    case ErrorCode::OutOfOrderReference: return "OutOfOrderReference";
    case ErrorCode::UnknownReference: return "UnknownReference";
    case ErrorCode::QueueNotExhausted: return "QueueNotExhausted";
    case ErrorCode::DataError: return "DataError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace agepost
