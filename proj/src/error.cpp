#include "gfm/error.hpp"

namespace gfm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kDegenerate: return "Degenerate";
    case ErrorCode::kDegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace gfm
