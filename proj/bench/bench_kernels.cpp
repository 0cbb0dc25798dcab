// Serial reference vs OpenMP paths. The Arg is 0 for serial, 1 for parallel.
#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "gfm/harness.hpp"
#include "gfm/kernels.hpp"
#include "gfm/selection.hpp"

namespace {

using namespace gfm;

std::vector<FeatureBlock> make_blocks(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<FeatureBlock> blocks;
  blocks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Mat26 rows;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 6; ++c) rows(r, c) = g(rng);
    blocks.emplace_back(i, rows);
  }
  return blocks;
}

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::kSerial : Execution::kParallel;
}

void BM_BestCandidate(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  const auto blocks = make_blocks(n, 7);
  std::vector<Mat6> infos;
  for (const auto& b : blocks) infos.push_back(b.information());
  std::vector<std::size_t> cand(n);
  std::iota(cand.begin(), cand.end(), 0);
  Mat6 base = 1e-6 * Mat6::Identity();
  for (std::size_t i = 0; i < 10; ++i) base += infos[i];
  const double base_ld = log_det(base);
  for (auto _ : state) {
    auto best = kernels::best_candidate(MetricKind::kMaxLogDet, base, base_ld, infos, cand,
                                        exec_of(state));
    benchmark::DoNotOptimize(best);
  }
}
BENCHMARK(BM_BestCandidate)->ArgsProduct({{0, 1}, {500, 2000}});

void BM_Greedy(benchmark::State& state) {
  SelectionProblem p;
  p.blocks = make_blocks(1000, 11);
  p.k = 100;
  p.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_select(p));
}
BENCHMARK(BM_Greedy)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Lazier(benchmark::State& state) {
  SelectionProblem p;
  p.blocks = make_blocks(1000, 13);
  p.k = 100;
  p.epsilon = 0.1;
  p.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(lazier_greedy_select(p));
}
BENCHMARK(BM_Lazier)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// Trial loop: workers 1 runs serially, workers 0 uses the OpenMP default.
void BM_PoseOptTrials(benchmark::State& state) {
  auto spec = default_spec(ExperimentKind::kPoseOptMetrics);
  spec.trials = 8;
  spec.workers = state.range(0) == 0 ? 1 : 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_pose_opt_metrics(spec));
}
BENCHMARK(BM_PoseOptTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
