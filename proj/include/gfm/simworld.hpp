#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gfm/geometry.hpp"

namespace gfm {

struct ScenarioConfig {
  std::size_t n_points = 200;
  double depth_min = 2.0;   // meters
  double depth_max = 10.0;  // meters
  double motion_translation = 0.1;  // uniform per-axis half-range, meters
  double motion_rotation = 0.05;    // uniform per-axis half-range, radians
  double map_sigma = 0.02;   // meters
  double pixel_sigma = 1.5;  // pixels
  CameraModel camera;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ScenarioMeasurement {
  std::size_t point = 0;  // index into points_true / points_map
  Vec2 pixel;
};

struct Scenario {
  ScenarioConfig config;
  Pose true_pose;  // world-to-camera after the motion
  std::vector<Vec3> points_true;
  std::vector<Vec3> points_map;  // map copy with i.i.d. Gaussian noise
  std::vector<bool> visible;     // inside the image after the motion
  std::vector<ScenarioMeasurement> measurements;  // visible points, ascending

  std::size_t visible_count() const noexcept { return measurements.size(); }
};

inline constexpr std::size_t kMinVisiblePoints = 10;

// Samples pixels uniformly over the image and depths uniformly over
// [depth_min, depth_max] for a camera at the world origin, back-projects,
// then moves the camera by se3_exp of a uniform tangent draw. Deterministic
// in config.seed. Throws Degenerate when fewer than kMinVisiblePoints remain
// visible.
Scenario generate_scenario(const ScenarioConfig& config);

// Same world and motion, fresh pixel noise of the given sigma.
Scenario redraw_measurement_noise(const Scenario& scenario, double pixel_sigma,
                                  std::uint64_t seed);

// Line-oriented text format; doubles are written with 17 significant digits
// so a round-trip is bit-exact.
void write_scenario(std::ostream& out, const Scenario& scenario);
// Throws ConfigError on malformed input.
Scenario read_scenario(std::istream& in);

// Empty when identical, otherwise a description of the first difference.
std::string compare_scenarios(const Scenario& a, const Scenario& b);

}  // namespace gfm
