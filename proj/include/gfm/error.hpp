#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gfm {

enum class ErrorCode {
  kInvalidArgument,
  kBehindCamera,
  kNotPositiveDefinite,
  kRankDeficient,
  kTooLarge,
  kDiverged,
  kDegenerate,
  kDegenerateBaseline,
  kConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Base of every exception thrown by the library. The code lets callers
// (the harness failure counters, the CLI exit-code mapping) dispatch without
// a chain of catch clauses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define GFM_DECLARE_ERROR(Name, Code)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
  }

GFM_DECLARE_ERROR(InvalidArgument, kInvalidArgument);
GFM_DECLARE_ERROR(BehindCamera, kBehindCamera);
GFM_DECLARE_ERROR(NotPositiveDefinite, kNotPositiveDefinite);
GFM_DECLARE_ERROR(RankDeficient, kRankDeficient);
GFM_DECLARE_ERROR(TooLarge, kTooLarge);
GFM_DECLARE_ERROR(Diverged, kDiverged);
GFM_DECLARE_ERROR(Degenerate, kDegenerate);
GFM_DECLARE_ERROR(DegenerateBaseline, kDegenerateBaseline);
GFM_DECLARE_ERROR(ConfigError, kConfigError);

#undef GFM_DECLARE_ERROR

}  // namespace gfm
