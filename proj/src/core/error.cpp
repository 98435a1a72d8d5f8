#include "core/error.hpp"

namespace regtrack {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::singular_warp: return "singular_warp";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::missing_dataset: return "missing_dataset";
  }
  return "unknown";
}

}  // namespace regtrack
