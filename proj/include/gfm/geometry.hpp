#pragma once

#include <Eigen/Core>

namespace gfm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat26 = Eigen::Matrix<double, 2, 6>;

// Pose increment. Components 0..2 are the translational part (meters),
// 3..5 the rotational part (radians).
using TangentVector = Vec6;

struct CameraModel {
  double fx = 460.0;
  double fy = 460.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
  double baseline = 0.0;   // meters; 0 for monocular
  double min_depth = 0.1;  // meters

  // Throws InvalidArgument when an invariant is broken.
  void validate() const;
  bool in_image(const Vec2& pixel) const noexcept;
  bool is_stereo() const noexcept { return baseline > 0.0; }
};

// Rigid world-to-camera transform: p_cam = R * p_world + t.
class Pose {
 public:
  Pose() = default;
  // Re-orthogonalizes `rotation` by polar decomposition when it drifts more
  // than 1e-9 from SO(3). Throws InvalidArgument for reflections or
  // non-finite input.
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return Pose(); }

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 transform(const Vec3& p_world) const { return rotation_ * p_world + translation_; }
  // Camera center expressed in the world frame.
  Vec3 camera_center() const { return -rotation_.transpose() * translation_; }

  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

Mat3 hat(const Vec3& v);
Mat3 so3_exp(const Vec3& omega);
Vec3 so3_log(const Mat3& rotation);

Pose se3_exp(const TangentVector& xi);
TangentVector se3_log(const Pose& pose);

// Left-multiplicative update x <- exp(xi) * x.
inline Pose retract(const Pose& pose, const TangentVector& xi) { return se3_exp(xi) * pose; }

// Pinhole projection of a world point. Throws BehindCamera when the camera
// frame depth is below cam.min_depth.
Vec2 project_world(const CameraModel& cam, const Pose& pose, const Vec3& p_world);

// Right camera of a rectified horizontal stereo rig:
// u_r = u_l - fx * baseline / Z, v_r = v_l.
Vec2 project_world_right(const CameraModel& cam, const Pose& pose, const Vec3& p_world);

struct MeasurementJacobians {
  Mat26 H_x;  // d(pixel) / d(pose tangent), left perturbation
  Mat23 H_p;  // d(pixel) / d(world point)
};

MeasurementJacobians measurement_jacobians(const CameraModel& cam, const Pose& pose,
                                           const Vec3& p_world);
MeasurementJacobians measurement_jacobians_right(const CameraModel& cam, const Pose& pose,
                                                 const Vec3& p_world);

}  // namespace gfm
