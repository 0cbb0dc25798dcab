#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "gfm/geometry.hpp"

namespace gfm {

struct MatchedObservation {
  Vec3 map_point;                       // possibly noisy map copy, meters
  Vec2 pixel;
  Mat2 sigma_z = Mat2::Identity();      // pixels^2
  int pyramid_level = 0;
  Mat3 sigma_p = Mat3::Zero();          // map-point covariance folded into the weights
  // Right-camera measurement of a stereo match, if any.
  std::optional<Vec2> right_pixel;
  Mat2 right_sigma_z = Mat2::Identity();
};

struct SolveReport {
  Pose pose;
  std::size_t iterations = 0;
  double final_cost = 0.0;  // 0.5 * sum of squared whitened residuals
  bool converged = false;
};

struct GaussNewtonOptions {
  std::size_t max_iterations = 20;
  double tolerance = 1e-8;  // on the norm of the tangent step
};

// Pose-only weighted Gauss-Newton. Each residual z - h(x, p) is whitened by
// the Cholesky factor of Sigma_z + H_p Sigma_p H_p^T, evaluated at init and
// held fixed over the iterations. No damping.
// Throws RankDeficient when the normal matrix is singular, Diverged when the
// cost rises on two consecutive iterations or a point falls behind the camera.
SolveReport gauss_newton(const CameraModel& cam, std::span<const MatchedObservation> observations,
                         const Pose& init, const GaussNewtonOptions& options = {});

struct PoseError {
  double translational = 0.0;  // meters, distance between camera centers
  double rotational = 0.0;     // degrees, angle of R_est * R_true^T
};

PoseError pose_error(const Pose& estimate, const Pose& truth);

}  // namespace gfm
