#include "gfm/kernels.hpp"

#include <exception>
#include <vector>

#include <omp.h>

namespace gfm::kernels {

bool better(const CandidateScore& a, const CandidateScore& b) noexcept {
  if (!b.valid()) return a.valid();
  if (!a.valid()) return false;
  if (a.primary != b.primary) return a.primary > b.primary;
  if (a.secondary != b.secondary) return a.secondary > b.secondary;
  return a.index < b.index;
}

CandidateScore score_candidate(MetricKind kind, const Mat6& base, double base_log_det,
                               const Mat6& info, std::size_t index) {
  CandidateScore s;
  s.index = index;
  if (kind == MetricKind::kMaxLogDet) {
    s.primary = logdet_gain(base, base_log_det, info);
    s.secondary = 0.0;
    return s;
  }
  const Mat6 m = base + info;
  switch (kind) {
    case MetricKind::kMaxTrace:
      s.primary = m.trace();
      s.secondary = 0.0;
      break;
    case MetricKind::kMaxMinEigenValue:
      s.primary = symmetric_eigenvalues(m).back();
      s.secondary = 0.0;
      break;
    case MetricKind::kMinCond: {
      const auto eig = symmetric_eigenvalues(m);
      s.primary = eig.back() > 0.0 ? -(eig.front() / eig.back())
                                   : -std::numeric_limits<double>::infinity();
      s.secondary = eig.back();
      break;
    }
    case MetricKind::kMaxLogDet:
      break;
  }
  return s;
}

void score_candidates(MetricKind kind, const Mat6& base, double base_log_det,
                      std::span<const Mat6> infos, std::span<const std::size_t> candidates,
                      std::span<CandidateScore> out, Execution exec) {
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  if (exec == Execution::kSerial) {
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      out[j] = score_candidate(kind, base, base_log_det, infos[candidates[j]], candidates[j]);
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    out[j] = score_candidate(kind, base, base_log_det, infos[candidates[j]], candidates[j]);
  }
}

CandidateScore best_of(std::span<const CandidateScore> scores) noexcept {
  CandidateScore best;
  for (const auto& s : scores) {
    if (better(s, best)) best = s;
  }
  return best;
}

CandidateScore best_candidate(MetricKind kind, const Mat6& base, double base_log_det,
                              std::span<const Mat6> infos,
                              std::span<const std::size_t> candidates, Execution exec) {
  if (exec == Execution::kSerial) {
    CandidateScore best;
    for (std::size_t id : candidates) {
      const auto s = score_candidate(kind, base, base_log_det, infos[id], id);
      if (better(s, best)) best = s;
    }
    return best;
  }
  std::vector<CandidateScore> scores(candidates.size());
  score_candidates(kind, base, base_log_det, infos, candidates, scores, exec);
  return best_of(scores);
}

void parallel_for(std::size_t n, Execution exec, int workers,
                  const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Execution::kSerial) {
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

int max_workers() noexcept { return omp_get_max_threads(); }

}  // namespace gfm::kernels
