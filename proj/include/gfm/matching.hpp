#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "gfm/geometry.hpp"
#include "gfm/random.hpp"
#include "gfm/simworld.hpp"
#include "gfm/uncertainty.hpp"

namespace gfm {

struct MapPoint {
  std::size_t id = 0;
  Vec3 position;
  Mat3 sigma_p = (0.02 * 0.02) * Mat3::Identity();
  int expected_level = 0;
};

struct FrameMeasurement {
  Vec2 pixel;
  int level = 0;
  std::optional<std::size_t> point_id;  // ground truth; none for clutter
};

struct FrameMeasurements {
  std::vector<FrameMeasurement> left;
  std::vector<FrameMeasurement> right;  // empty for monocular frames
};

enum class FrameSide { kLeft, kRight };

struct MatchTriple {
  std::size_t map_point_id = 0;
  FrameMeasurement left;
  std::optional<FrameMeasurement> right;
  FeatureBlock block;  // whitened with the matched measurement covariance(s)
};

struct MatchStats {
  std::size_t candidates = 0;        // map points projecting into the guess frame
  std::size_t sample_size = 0;
  std::size_t gain_evaluations = 0;
  std::size_t match_attempts = 0;    // left and right window searches
  double elapsed = 0.0;              // seconds accumulated against t_max
  bool budget_exhausted = false;
  // Per acceptance: the gain it was chosen with, the map point ids of the
  // sampled batch it won, and the accumulator logDet after adding its block.
  std::vector<double> accepted_gains;
  std::vector<std::vector<std::size_t>> accepted_batches;
  std::vector<double> log_dets;
};

struct MatchSet {
  std::vector<MatchTriple> triples;  // acceptance order
  MatchStats stats;
};

struct MatcherSim {
  double window_radius = 15.0;    // pixels, Chebyshev
  double miss_probability = 0.0;  // in [0, 1)
  std::optional<double> right_miss_probability;  // defaults to miss_probability
  std::size_t clutter = 0;        // decoy measurements per frame side
  std::uint64_t seed = 0;

  void validate() const;
};

// Fixed-window matcher against simulated measurements with known
// correspondence. Clutter never matches. Stateful: the Bernoulli stream
// advances once per in-window query, so results depend on query order.
class SimulatedMatcher {
 public:
  SimulatedMatcher(const MatcherSim& sim, const FrameMeasurements& frame);

  std::optional<FrameMeasurement> match(const CameraModel& cam, const MapPoint& point,
                                        const Pose& pose_guess, FrameSide side);

  std::size_t attempts() const noexcept { return attempts_; }
  const MatcherSim& sim() const noexcept { return sim_; }

 private:
  MatcherSim sim_;
  const FrameMeasurements* frame_;
  std::unordered_map<std::size_t, std::size_t> left_by_point_;
  std::unordered_map<std::size_t, std::size_t> right_by_point_;
  Rng rng_;
  std::size_t attempts_ = 0;
};

std::optional<FrameMeasurement> window_match(const CameraModel& cam, const MapPoint& point,
                                             const Pose& pose_guess, FrameSide side,
                                             SimulatedMatcher& matcher);

struct MatchingOptions {
  double prior_lambda = 1e-6;
  double base_sigma_px = 1.0;     // sigma at pyramid level 0
  double scale_factor = 1.2;
  std::uint64_t seed = 0;         // candidate sampling stream
};

// Active matching: lazier-greedy rounds over the map points where a sampled
// candidate only enters the accumulator once the matcher finds its
// measurement. Stops at k matches, no candidates left, or t_max seconds.
MatchSet good_feature_matching_mono(std::span<const MapPoint> points, std::size_t k,
                                    double t_max, double epsilon, SimulatedMatcher& matcher,
                                    const CameraModel& camera, const Pose& pose_guess,
                                    const MatchingOptions& options = {});

// As mono, plus a right-frame search after every left match; a found right
// measurement stacks its whitened rows into a 4x6 block. Requires a stereo
// camera.
MatchSet good_feature_matching_stereo(std::span<const MapPoint> points, std::size_t k,
                                      double t_max, double epsilon, SimulatedMatcher& matcher,
                                      const CameraModel& camera, const Pose& pose_guess,
                                      const MatchingOptions& options = {});

// Map-to-frame budget left after keyframe matching: max(0, n_good - n_k2f).
std::size_t matching_budget(std::size_t good_feature_target, std::size_t keyframe_matches) noexcept;

struct FrameSimConfig {
  double pixel_sigma = 1.0;   // sigma at level 0; level l uses sigma * factor^l
  double scale_factor = 1.2;
  int max_level = 3;
  std::size_t clutter = 0;
  std::uint64_t seed = 0;
};

// Left (and, for stereo cameras, right) measurements of every visible point
// in the scenario, with levels drawn uniformly in [0, max_level].
FrameMeasurements simulate_frame(const Scenario& scenario, const FrameSimConfig& config);

// Map points built from the scenario's noisy map copy.
std::vector<MapPoint> map_points_from(const Scenario& scenario);

}  // namespace gfm
