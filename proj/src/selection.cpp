#include "gfm/selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gfm/error.hpp"

namespace gfm {

namespace {

using kernels::CandidateScore;
using Clock = std::chrono::steady_clock;

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<Mat6> informations(const std::vector<FeatureBlock>& blocks) {
  std::vector<Mat6> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(b.information());
  return out;
}

// Orientation-aware key of a whole accumulator (larger is better).
CandidateScore accumulator_key(MetricKind kind, const Mat6& m) {
  if (kind == MetricKind::kMaxLogDet) return {log_det(m), 0.0, 0};
  return kernels::score_candidate(kind, Mat6::Zero(), 0.0, m, 0);
}

bool strictly_better_key(const CandidateScore& a, const CandidateScore& b) {
  if (a.primary != b.primary) return a.primary > b.primary;
  return a.secondary > b.secondary;
}

std::uint64_t binomial_capped(std::size_t n, std::size_t k, std::uint64_t cap) {
  k = std::min(k, n - k);
  std::uint64_t c = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    // c * (n - k + i) / i stays integral at every step.
    const std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
    if (c > (cap * i) / num + 1) return cap + 1;
    c = c * num / i;
    if (c > cap) return cap + 1;
  }
  return c;
}

SelectionResult finish(const SelectionProblem& problem, SelectionResult result,
                       Clock::time_point start) {
  result.metric_value = subset_metric(problem.metric, problem.blocks, result.chosen,
                                      problem.prior_lambda);
  result.wall_time = seconds_since(start);
  return result;
}

}  // namespace

void SelectionProblem::validate() const {
  if (k > blocks.size()) {
    throw InvalidArgument("k=" + std::to_string(k) + " exceeds n=" + std::to_string(blocks.size()));
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0,1)");
  if (!(prior_lambda > 0.0)) throw InvalidArgument("prior_lambda must be positive");
}

std::size_t sample_size(std::size_t n, std::size_t k, double epsilon) {
  if (k == 0 || k > n) throw InvalidArgument("sample_size requires n >= k >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0,1)");
  const double raw = std::ceil(static_cast<double>(n) / static_cast<double>(k) *
                               std::log(1.0 / epsilon));
  if (!(raw < static_cast<double>(n))) return n;
  return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

double subset_metric(MetricKind kind, std::span<const FeatureBlock> blocks,
                     std::span<const std::size_t> chosen, double prior_lambda) {
  InfoMatrix m(prior_lambda);
  for (std::size_t i : chosen) m.add(blocks[i]);
  return evaluate(kind, m);
}

double normalized_log_det(std::span<const FeatureBlock> blocks,
                          std::span<const std::size_t> chosen, double prior_lambda) {
  return subset_metric(MetricKind::kMaxLogDet, blocks, chosen, prior_lambda) -
         6.0 * std::log(prior_lambda);
}

SelectionResult brute_force_select(const SelectionProblem& problem) {
  problem.validate();
  const auto start = Clock::now();
  const std::size_t n = problem.blocks.size();
  const std::size_t k = problem.k;
  if (binomial_capped(n, k, kMaxBruteForceSubsets) > kMaxBruteForceSubsets) {
    throw TooLarge("C(" + std::to_string(n) + ", " + std::to_string(k) + ") subsets exceed the " +
                   std::to_string(kMaxBruteForceSubsets) + " guard");
  }
  const auto infos = informations(problem.blocks);
  const Mat6 prior = problem.prior_lambda * Mat6::Identity();

  SelectionResult result;
  std::vector<std::size_t> combo(k);
  std::iota(combo.begin(), combo.end(), std::size_t{0});
  std::vector<std::size_t> best = combo;
  CandidateScore best_key;
  bool have_best = false;

  // Lexicographic enumeration; only strict improvements replace the incumbent.
  while (true) {
    Mat6 m = prior;
    for (std::size_t i : combo) m += infos[i];
    const auto key = accumulator_key(problem.metric, m);
    ++result.gain_evaluations;
    if (!have_best || strictly_better_key(key, best_key)) {
      best_key = key;
      best = combo;
      have_best = true;
    }
    std::size_t pos = k;
    while (pos > 0 && combo[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) break;
    ++combo[pos - 1];
    for (std::size_t j = pos; j < k; ++j) combo[j] = combo[j - 1] + 1;
  }
  result.chosen = std::move(best);
  result.evaluations_per_round = {result.gain_evaluations};
  return finish(problem, std::move(result), start);
}

SelectionResult greedy_select(const SelectionProblem& problem) {
  problem.validate();
  const auto start = Clock::now();
  const auto infos = informations(problem.blocks);

  std::vector<std::size_t> remaining(problem.blocks.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});

  SelectionResult result;
  Mat6 m = problem.prior_lambda * Mat6::Identity();
  for (std::size_t round = 0; round < problem.k; ++round) {
    const double ld = log_det(m);
    const auto best = kernels::best_candidate(problem.metric, m, ld, infos, remaining,
                                              problem.execution);
    result.gain_evaluations += remaining.size();
    result.evaluations_per_round.push_back(remaining.size());
    result.chosen.push_back(best.index);
    m += infos[best.index];
    remaining.erase(std::find(remaining.begin(), remaining.end(), best.index));
  }
  return finish(problem, std::move(result), start);
}

SelectionResult lazy_greedy_select(const SelectionProblem& problem) {
  problem.validate();
  if (problem.metric != MetricKind::kMaxLogDet) {
    throw InvalidArgument("lazy greedy is defined for MaxLogDet only");
  }
  const auto start = Clock::now();
  const std::size_t n = problem.blocks.size();
  const auto infos = informations(problem.blocks);

  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<double> stale(n, kInf);

  struct Bounded {
    double bound;
    std::size_t id;
  };
  std::vector<Bounded> order;
  order.reserve(n);

  SelectionResult result;
  Mat6 m = problem.prior_lambda * Mat6::Identity();
  for (std::size_t round = 0; round < problem.k; ++round) {
    const double ld = log_det(m);
    order.clear();
    for (std::size_t id : remaining) {
      const Vec6 diag = m.diagonal() + infos[id].diagonal();
      double bound = std::isfinite(ld) ? hadamard_bound(diag) - ld : kInf;
      // Stale gains bound fresh ones by submodularity; the slack absorbs
      // round-off so pruning can only be conservative.
      bound = std::min(bound, stale[id]);
      bound += 1e-9 * (1.0 + std::abs(bound));
      order.push_back({bound, id});
    }
    std::sort(order.begin(), order.end(), [](const Bounded& a, const Bounded& b) {
      return a.bound != b.bound ? a.bound > b.bound : a.id < b.id;
    });

    CandidateScore best;
    std::size_t evaluated = 0;
    for (const auto& c : order) {
      if (best.valid() && c.bound < best.primary) break;
      const auto s = kernels::score_candidate(MetricKind::kMaxLogDet, m, ld, infos[c.id], c.id);
      ++evaluated;
      stale[c.id] = s.primary;
      if (kernels::better(s, best)) best = s;
    }
    result.gain_evaluations += evaluated;
    result.evaluations_per_round.push_back(evaluated);
    result.chosen.push_back(best.index);
    m += infos[best.index];
    remaining.erase(std::find(remaining.begin(), remaining.end(), best.index));
  }
  return finish(problem, std::move(result), start);
}

SelectionResult lazier_greedy_select(const SelectionProblem& problem) {
  problem.validate();
  const auto start = Clock::now();
  SelectionResult result;
  if (problem.k == 0) return finish(problem, std::move(result), start);

  const std::size_t n = problem.blocks.size();
  const std::size_t s = sample_size(n, problem.k, problem.epsilon);
  const auto infos = informations(problem.blocks);
  RoundSampler sampler(n, problem.seed);

  Mat6 m = problem.prior_lambda * Mat6::Identity();
  for (std::size_t round = 0; round < problem.k; ++round) {
    const auto sample = sampler.draw_round(s);
    const auto best = kernels::best_candidate(problem.metric, m, log_det(m), infos, sample,
                                              problem.execution);
    result.gain_evaluations += sample.size();
    result.evaluations_per_round.push_back(sample.size());
    result.chosen.push_back(best.index);
    m += infos[best.index];
    sampler.remove(best.index);
  }
  return finish(problem, std::move(result), start);
}

SelectionResult random_select(const SelectionProblem& problem) {
  problem.validate();
  const auto start = Clock::now();
  SelectionResult result;
  RoundSampler sampler(problem.blocks.size(), problem.seed);
  const auto sample = sampler.draw_round(problem.k);
  result.chosen.assign(sample.begin(), sample.end());
  return finish(problem, std::move(result), start);
}

TheoryBounds theory_bounds(std::size_t k, double mu, double epsilon) {
  if (!(mu > 0.0 && mu <= 1.0)) throw InvalidArgument("mu must lie in (0,1]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0,1)");
  const double root_mu = std::sqrt(mu);
  const double inner = root_mu + std::log(epsilon + std::exp(-1.0)) / root_mu;
  const double p = 1.0 - std::exp(-0.5 * static_cast<double>(k) * inner * inner);
  return {1.0 - std::exp(-1.0) - epsilon, std::clamp(p, 0.0, 1.0)};
}

std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("draw_below needs a positive bound");
  // Reject the tail so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

RoundSampler::RoundSampler(std::size_t n, std::uint64_t seed) : pool_(n), rng_(seed) {
  std::iota(pool_.begin(), pool_.end(), std::size_t{0});
}

std::span<const std::size_t> RoundSampler::draw_round(std::size_t s) {
  sampled_ = 0;
  const std::size_t m = std::min(s, pool_.size());
  for (std::size_t j = 0; j < m; ++j) replenish();
  return sample();
}

bool RoundSampler::replenish() {
  if (sampled_ >= pool_.size()) return false;
  const auto r = sampled_ + draw_below(rng_, pool_.size() - sampled_);
  std::swap(pool_[sampled_], pool_[r]);
  ++sampled_;
  return true;
}

void RoundSampler::remove(std::size_t candidate) {
  const auto it = std::find(pool_.begin(), pool_.end(), candidate);
  if (it == pool_.end()) throw InvalidArgument("candidate not in pool");
  if (static_cast<std::size_t>(it - pool_.begin()) < sampled_) --sampled_;
  pool_.erase(it);
}

}  // namespace gfm
