#include "gfm/geometry.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "gfm/error.hpp"

namespace gfm {

namespace {

constexpr double kOrthoTolerance = 1e-9;

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

// Left Jacobian of SO(3); maps the translational tangent part to t.
Mat3 so3_left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  if (theta < 1e-5) {
    return Mat3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * w +
         ((theta - std::sin(theta)) / (t2 * theta)) * w * w;
}

Mat3 so3_left_jacobian_inverse(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  if (theta < 1e-5) {
    return Mat3::Identity() - 0.5 * w + (1.0 / 12.0) * w * w;
  }
  const double coeff =
      (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
  return Mat3::Identity() - 0.5 * w + coeff * w * w;
}

void require_depth(const CameraModel& cam, const Vec3& p_cam) {
  if (!(p_cam.z() >= cam.min_depth)) {
    throw BehindCamera("camera-frame depth " + std::to_string(p_cam.z()) +
                       " below min_depth " + std::to_string(cam.min_depth));
  }
}

// d(pixel)/d(p_cam) for a pinhole whose horizontal optical center is shifted
// by `x_offset` meters (0 for the left camera, baseline for the right one).
Mat23 projection_derivative(const CameraModel& cam, const Vec3& p_cam, double x_offset) {
  const double inv_z = 1.0 / p_cam.z();
  const double inv_z2 = inv_z * inv_z;
  Mat23 d;
  d << cam.fx * inv_z, 0.0, -cam.fx * (p_cam.x() - x_offset) * inv_z2,
       0.0, cam.fy * inv_z, -cam.fy * p_cam.y() * inv_z2;
  return d;
}

MeasurementJacobians jacobians_with_offset(const CameraModel& cam, const Pose& pose,
                                           const Vec3& p_world, double x_offset) {
  const Vec3 p_cam = pose.transform(p_world);
  require_depth(cam, p_cam);
  const Mat23 d_proj = projection_derivative(cam, p_cam, x_offset);

  // Left perturbation: exp(xi) * p_cam ~= p_cam + rho + phi x p_cam.
  Eigen::Matrix<double, 3, 6> d_point_d_xi;
  d_point_d_xi.leftCols<3>().setIdentity();
  d_point_d_xi.rightCols<3>() = -hat(p_cam);

  MeasurementJacobians j;
  j.H_x = d_proj * d_point_d_xi;
  j.H_p = d_proj * pose.rotation();
  return j;
}

}  // namespace

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
  if (!(baseline >= 0.0)) throw InvalidArgument("baseline must be non-negative");
  if (!(min_depth > 0.0)) throw InvalidArgument("min_depth must be positive");
}

bool CameraModel::in_image(const Vec2& pixel) const noexcept {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() < static_cast<double>(width) &&
         pixel.y() < static_cast<double>(height);
}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidArgument("pose has non-finite entries");
  }
  if (rotation.determinant() <= 0.0) {
    throw InvalidArgument("rotation must have positive determinant");
  }
  const double drift = (rotation.transpose() * rotation - Mat3::Identity()).norm();
  if (drift > kOrthoTolerance) rotation_ = orthonormalize(rotation);
}

Pose Pose::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return Pose(rt, -rt * translation_);
}

Pose Pose::operator*(const Pose& rhs) const {
  return Pose(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  if (theta < 1e-5) {
    // Second-order Taylor terms; the truncation error is O(theta^3).
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  return Mat3::Identity() + (std::sin(theta) / theta) * w +
         ((1.0 - std::cos(theta)) / (theta * theta)) * w * w;
}

Vec3 so3_log(const Mat3& r) {
  const Vec3 w(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)), 0.5 * (r(1, 0) - r(0, 1)));
  const double sin_theta = w.norm();
  const double cos_theta = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < 1e-5) return w;  // theta / sin(theta) -> 1
  if (theta < M_PI - 1e-3) return (theta / sin_theta) * w;

  // Near pi the skew part vanishes; recover the axis from the symmetric part
  // (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
  const Mat3 s = 0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity();
  Eigen::Index col = 0;
  s.diagonal().maxCoeff(&col);
  Vec3 axis = s.col(col).normalized();
  if (axis.dot(w) < 0.0) axis = -axis;
  return theta * axis;
}

Pose se3_exp(const TangentVector& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  return Pose(so3_exp(phi), so3_left_jacobian(phi) * rho);
}

TangentVector se3_log(const Pose& pose) {
  const Vec3 phi = so3_log(pose.rotation());
  TangentVector xi;
  xi.head<3>() = so3_left_jacobian_inverse(phi) * pose.translation();
  xi.tail<3>() = phi;
  return xi;
}

Vec2 project_world(const CameraModel& cam, const Pose& pose, const Vec3& p_world) {
  const Vec3 p_cam = pose.transform(p_world);
  require_depth(cam, p_cam);
  return {cam.fx * p_cam.x() / p_cam.z() + cam.cx, cam.fy * p_cam.y() / p_cam.z() + cam.cy};
}

Vec2 project_world_right(const CameraModel& cam, const Pose& pose, const Vec3& p_world) {
  const Vec3 p_cam = pose.transform(p_world);
  require_depth(cam, p_cam);
  return {cam.fx * (p_cam.x() - cam.baseline) / p_cam.z() + cam.cx,
          cam.fy * p_cam.y() / p_cam.z() + cam.cy};
}

MeasurementJacobians measurement_jacobians(const CameraModel& cam, const Pose& pose,
                                           const Vec3& p_world) {
  return jacobians_with_offset(cam, pose, p_world, 0.0);
}

MeasurementJacobians measurement_jacobians_right(const CameraModel& cam, const Pose& pose,
                                                 const Vec3& p_world) {
  return jacobians_with_offset(cam, pose, p_world, cam.baseline);
}

}  // namespace gfm
