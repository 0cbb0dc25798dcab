#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>

#include "gfm/geometry.hpp"
#include "gfm/metrics.hpp"

namespace gfm {

// Serial is the reference path; Parallel runs the same per-item work under
// OpenMP and reduces in index order, so both produce identical results.
enum class Execution { kSerial, kParallel };

namespace kernels {

inline constexpr std::size_t kNoCandidate = std::numeric_limits<std::size_t>::max();

// Larger is better on (primary, secondary); ties go to the lower index.
struct CandidateScore {
  double primary = -std::numeric_limits<double>::infinity();
  double secondary = -std::numeric_limits<double>::infinity();
  std::size_t index = kNoCandidate;

  bool valid() const noexcept { return index != kNoCandidate; }
};

bool better(const CandidateScore& a, const CandidateScore& b) noexcept;

// Scores adding `info` to `base`. MaxLogDet scores by logDet gain (needs
// base_log_det); the other metrics score the resulting matrix directly, with
// MinCond negated and broken by the minimum eigenvalue.
CandidateScore score_candidate(MetricKind kind, const Mat6& base, double base_log_det,
                               const Mat6& info, std::size_t index);

// out[j] = score of candidates[j]; `infos` is indexed by candidate id.
void score_candidates(MetricKind kind, const Mat6& base, double base_log_det,
                      std::span<const Mat6> infos, std::span<const std::size_t> candidates,
                      std::span<CandidateScore> out, Execution exec);

CandidateScore best_of(std::span<const CandidateScore> scores) noexcept;

CandidateScore best_candidate(MetricKind kind, const Mat6& base, double base_log_det,
                              std::span<const Mat6> infos,
                              std::span<const std::size_t> candidates, Execution exec);

// Runs body(i) for i in [0, n). Exceptions are captured per item and the one
// with the lowest index is rethrown after the loop. workers <= 0 uses the
// OpenMP default.
void parallel_for(std::size_t n, Execution exec, int workers,
                  const std::function<void(std::size_t)>& body);

int max_workers() noexcept;

}  // namespace kernels
}  // namespace gfm
