#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gfm/kernels.hpp"
#include "gfm/metrics.hpp"
#include "gfm/uncertainty.hpp"

namespace gfm {

struct SelectionProblem {
  std::vector<FeatureBlock> blocks;
  std::size_t k = 0;
  MetricKind metric = MetricKind::kMaxLogDet;
  double epsilon = 0.1;         // lazier decay factor
  double prior_lambda = 1e-6;   // lambda*I keeps early accumulators regular
  std::uint64_t seed = 0;
  Execution execution = Execution::kSerial;

  // Throws InvalidArgument unless 0 <= k <= n, epsilon in (0,1), lambda > 0.
  void validate() const;
};

struct SelectionResult {
  std::vector<std::size_t> chosen;  // indices into problem.blocks, pick order
  double metric_value = 0.0;        // metric of lambda*I + sum of chosen blocks
  std::size_t gain_evaluations = 0;
  std::vector<std::size_t> evaluations_per_round;
  double wall_time = 0.0;           // seconds
};

inline constexpr std::uint64_t kMaxBruteForceSubsets = 1'000'000;

// s = min(n, ceil((n/k) * ln(1/epsilon))), at least 1.
std::size_t sample_size(std::size_t n, std::size_t k, double epsilon);

// Exhaustive search; ties go to the lexicographically smallest index set.
// Throws TooLarge when C(n, k) exceeds kMaxBruteForceSubsets.
SelectionResult brute_force_select(const SelectionProblem& problem);

// k rounds of argmax over every remaining candidate; ties to the lowest index.
SelectionResult greedy_select(const SelectionProblem& problem);

// Greedy with candidates pruned by an upper bound on their gain: the smaller
// of the last evaluated (stale) gain and the Hadamard bound. Returns the same
// set as greedy_select. MaxLogDet only.
SelectionResult lazy_greedy_select(const SelectionProblem& problem);

// Each round evaluates only a uniform sample of sample_size(n, k, epsilon)
// remaining candidates.
SelectionResult lazier_greedy_select(const SelectionProblem& problem);

// Uniform k-subset without replacement.
SelectionResult random_select(const SelectionProblem& problem);

struct TheoryBounds {
  double ratio_expectation = 0.0;  // 1 - 1/e - epsilon
  double probability = 0.0;        // lower bound on reaching it
};

// mu is the average per-round approximation ratio of the margin-gain
// maximization, supplied by the caller.
TheoryBounds theory_bounds(std::size_t k, double mu, double epsilon);

// logDet(lambda*I + sum_{i in chosen} H_c(i)^T H_c(i)) - logDet(lambda*I).
double normalized_log_det(std::span<const FeatureBlock> blocks,
                          std::span<const std::size_t> chosen, double prior_lambda);

// The metric of lambda*I + sum of the chosen blocks.
double subset_metric(MetricKind kind, std::span<const FeatureBlock> blocks,
                     std::span<const std::size_t> chosen, double prior_lambda);

// Bounded uniform integer in [0, bound) by rejection; portable across
// standard libraries, unlike std::uniform_int_distribution.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound);

// Candidate pool shared by the lazier selector and active matching. The
// pool is kept in a deterministic order: the current round's sample occupies
// the front, not-yet-sampled candidates the back.
class RoundSampler {
 public:
  RoundSampler(std::size_t n, std::uint64_t seed);

  // Starts a round by sampling min(s, remaining()) candidates.
  std::span<const std::size_t> draw_round(std::size_t s);
  // Moves one not-yet-sampled candidate into the sample; false if none left.
  bool replenish();
  // Drops a candidate from the pool (and from the sample if present).
  void remove(std::size_t candidate);

  std::span<const std::size_t> sample() const noexcept { return {pool_.data(), sampled_}; }
  std::size_t remaining() const noexcept { return pool_.size(); }
  bool empty() const noexcept { return pool_.empty(); }

 private:
  std::vector<std::size_t> pool_;
  std::size_t sampled_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace gfm
