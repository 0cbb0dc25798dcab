#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gfm/geometry.hpp"
#include "gfm/metrics.hpp"
#include "gfm/report.hpp"
#include "gfm/simworld.hpp"

namespace gfm {

enum class ExperimentKind { kPoseOptMetrics, kLazierBenchmark, kMatchingSim, kBoundsCurve };

std::string_view to_string(ExperimentKind kind) noexcept;
std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) noexcept;

// Subset strategies compared in the pose-optimization study: greedy under
// each metric, a uniform random subset, and every visible feature.
enum class PoseOptMethod { kMaxTrace, kMinCond, kMaxMinEigenValue, kMaxLogDet, kRandom, kAll };

std::string_view to_string(PoseOptMethod method) noexcept;
std::optional<PoseOptMethod> parse_pose_opt_method(std::string_view name) noexcept;

struct PoseOptParams {
  std::vector<std::size_t> subset_sizes{80, 100, 120, 140, 160, 180, 200};
  std::vector<double> pixel_sigmas{0.5, 1.5, 2.5};
  std::vector<PoseOptMethod> methods{PoseOptMethod::kMaxTrace,         PoseOptMethod::kMinCond,
                                     PoseOptMethod::kMaxMinEigenValue, PoseOptMethod::kMaxLogDet,
                                     PoseOptMethod::kRandom,           PoseOptMethod::kAll};
};

struct LazierParams {
  std::vector<std::size_t> n_values{500, 1500, 2500};
  std::vector<std::size_t> k_values{40, 100, 180};
  std::vector<double> epsilons{0.9, 0.5, 0.1, 0.05, 0.01, 0.005};
  std::size_t repeats = 20;  // lazier runs per world; worlds = spec.trials
  double pixel_sigma = 1.5;
};

struct MatchingParams {
  std::vector<std::size_t> k_values{50, 100, 200};
  std::vector<double> epsilons{0.1};
  std::vector<double> miss_probabilities{0.0, 0.2};
  std::vector<std::string> modes{"mono", "stereo"};
  double window_radius = 15.0;        // pixels
  double t_max = 0.015;               // seconds
  std::size_t clutter = 0;
  int max_level = 3;
  double pixel_sigma = 1.0;           // level-0 sigma; also the whitening base
  double baseline = 0.11;             // meters, stereo camera
  double guess_translation = 0.01;    // uniform per-axis error of the pose prediction
  double guess_rotation = 0.005;
};

struct BoundsParams {
  std::size_t k = 450;
  double mu = 0.8;
  std::vector<double> epsilons;  // empty: 0.005 to 0.9 in steps of 0.005
  bool include_zero_point = true;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kPoseOptMetrics;
  std::size_t trials = 100;
  std::uint64_t base_seed = 1;
  int workers = 0;  // 0: OpenMP default, 1: serial
  ScenarioConfig world;  // n_points, depths, motion, map noise, camera
  PoseOptParams pose_opt;
  LazierParams lazier;
  MatchingParams matching;
  BoundsParams bounds;

  // Throws ConfigError on impossible grids.
  void validate() const;
};

// Desk-scale defaults for the kind.
ExperimentSpec default_spec(ExperimentKind kind);
// Trial counts of the original study (300 runs; 100 worlds for lazier).
void apply_full_scale(ExperimentSpec& spec);
// Overlays a JSON object on default_spec(kind). Unknown keys and type
// mismatches are ConfigError.
ExperimentSpec spec_from_json(ExperimentKind kind, std::string_view json_text);

ExperimentReport run_pose_opt_metrics(const ExperimentSpec& spec);
ExperimentReport run_lazier_benchmark(const ExperimentSpec& spec);
ExperimentReport run_matching_sim(const ExperimentSpec& spec);
ExperimentReport run_bounds_curve(const ExperimentSpec& spec);
ExperimentReport run_experiment(const ExperimentSpec& spec);

// RMS over trials of the translational distance between lazier and lazy
// estimates, divided by the RMS translational error of the lazy estimates.
// Throws DegenerateBaseline when the denominator is below 1e-12.
double error_ratio(std::span<const Pose> lazier_estimates, std::span<const Pose> lazy_estimates,
                   std::span<const Pose> truths);

// Threshold checks run by --check; each string describes one violation.
std::vector<std::string> check_report(const ExperimentSpec& spec, const ExperimentReport& report);

}  // namespace gfm
