#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "gfm/kernels.hpp"
#include "gfm/metrics.hpp"
#include "test_util.hpp"

namespace gfm {
namespace {

using kernels::CandidateScore;

std::vector<Mat6> infos_of(const std::vector<FeatureBlock>& blocks) {
  std::vector<Mat6> out;
  for (const auto& b : blocks) out.push_back(b.information());
  return out;
}

TEST(Kernels, BetterBreaksTiesByLowerIndex) {
  EXPECT_TRUE(kernels::better({2.0, 0.0, 5}, {1.0, 9.0, 1}));
  EXPECT_TRUE(kernels::better({1.0, 2.0, 5}, {1.0, 1.0, 1}));
  EXPECT_TRUE(kernels::better({1.0, 1.0, 1}, {1.0, 1.0, 5}));
  EXPECT_FALSE(kernels::better({1.0, 1.0, 5}, {1.0, 1.0, 1}));
  EXPECT_TRUE(kernels::better({-1e300, 0.0, 3}, CandidateScore{}));
  EXPECT_FALSE(CandidateScore{}.valid());
}

TEST(Kernels, SerialAndParallelScoresAgree) {
  const auto blocks = testing::random_feature_blocks(300, 31);
  const auto infos = infos_of(blocks);
  Mat6 base = 1e-6 * Mat6::Identity();
  for (int i = 0; i < 10; ++i) base += infos[i];
  std::vector<std::size_t> candidates;
  for (std::size_t i = 10; i < infos.size(); i += 2) candidates.push_back(i);

  for (auto kind : kAllMetrics) {
    std::vector<CandidateScore> serial(candidates.size()), parallel(candidates.size());
    kernels::score_candidates(kind, base, log_det(base), infos, candidates, serial, Execution::kSerial);
    kernels::score_candidates(kind, base, log_det(base), infos, candidates, parallel, Execution::kParallel);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      EXPECT_EQ(serial[j].primary, parallel[j].primary);
      EXPECT_EQ(serial[j].secondary, parallel[j].secondary);
      EXPECT_EQ(serial[j].index, candidates[j]);
    }
    const auto bs = kernels::best_candidate(kind, base, log_det(base), infos, candidates, Execution::kSerial);
    const auto bp = kernels::best_candidate(kind, base, log_det(base), infos, candidates, Execution::kParallel);
    EXPECT_EQ(bs.index, bp.index);
    EXPECT_EQ(kernels::best_of(serial).index, bs.index);
  }
}

TEST(Kernels, ScoresFollowMetricDirection) {
  const auto blocks = testing::random_feature_blocks(50, 32);
  const auto infos = infos_of(blocks);
  const Mat6 base = 1e-6 * Mat6::Identity() + infos[0] + infos[1] + infos[2];
  for (std::size_t i = 3; i < infos.size(); ++i) {
    const Mat6 next = base + infos[i];
    const auto s_cond = kernels::score_candidate(MetricKind::kMinCond, base, log_det(base), infos[i], i);
    EXPECT_DOUBLE_EQ(s_cond.primary, -evaluate(MetricKind::kMinCond, next));
    const auto s_tr = kernels::score_candidate(MetricKind::kMaxTrace, base, log_det(base), infos[i], i);
    EXPECT_NEAR(s_tr.primary, next.trace(), 1e-9 * next.trace());
    const auto s_ld = kernels::score_candidate(MetricKind::kMaxLogDet, base, log_det(base), infos[i], i);
    EXPECT_NEAR(s_ld.primary, log_det(next) - log_det(base), 1e-9);
  }
}

TEST(Kernels, ParallelForRethrowsLowestIndexFailure) {
  for (auto exec : {Execution::kSerial, Execution::kParallel}) {
    std::vector<int> hit(100, 0);
    try {
      kernels::parallel_for(100, exec, 0, [&](std::size_t i) {
        hit[i] = 1;
        if (i == 37 || i == 80) throw std::runtime_error(std::to_string(i));
      });
      FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "37");
    }
    // Every item still ran.
    for (int h : hit) EXPECT_EQ(h, 1);
  }
}

TEST(Kernels, ParallelForCoversEveryIndexOnce) {
  std::vector<int> count(1000, 0);
  kernels::parallel_for(count.size(), Execution::kParallel, 3, [&](std::size_t i) { ++count[i]; });
  for (int c : count) EXPECT_EQ(c, 1);
  EXPECT_GE(kernels::max_workers(), 1);
}

}  // namespace
}  // namespace gfm
