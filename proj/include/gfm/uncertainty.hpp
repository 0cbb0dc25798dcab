#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "gfm/geometry.hpp"

namespace gfm {

struct NoiseModel {
  Mat2 sigma_z = Mat2::Identity();                     // pixels^2
  Mat3 sigma_p = (0.02 * 0.02) * Mat3::Identity();     // meters^2
  double pyramid_scale_factor = 1.2;

  // sigma_z must be SPD; sigma_p symmetric positive semi-definite (a zero map
  // covariance is the noiseless-map case).
  void validate() const;
};

using BlockRows = Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor, 4, 6>;

// Whitened Jacobian row block H_c(i) of one feature: 2x6 for a monocular
// measurement, 4x6 when a right-camera measurement is stacked below.
class FeatureBlock {
 public:
  FeatureBlock() : rows_(BlockRows::Zero(2, 6)) {}
  FeatureBlock(std::size_t feature_id, const Mat26& left_rows);
  FeatureBlock(std::size_t feature_id, const Mat26& left_rows, const Mat26& right_rows);

  std::size_t feature_id() const noexcept { return feature_id_; }
  const BlockRows& rows() const noexcept { return rows_; }
  bool stereo_matched() const noexcept { return rows_.rows() == 4; }
  Mat6 information() const { return rows_.transpose() * rows_; }

  // Stacks whitened right-camera rows under the existing left rows.
  FeatureBlock with_right_rows(const Mat26& right_rows) const;

 private:
  std::size_t feature_id_ = 0;
  BlockRows rows_;
};

// Lower Cholesky factor W_r of Sigma_r = Sigma_z + H_p Sigma_p H_p^T.
// Throws NotPositiveDefinite when Sigma_r is not positive definite.
Mat2 residual_factor(const Mat23& H_p, const Mat2& sigma_z, const Mat3& sigma_p);

// W^{-1} X by forward substitution for a lower-triangular 2x2 W.
template <int Cols>
Eigen::Matrix<double, 2, Cols> forward_substitute(const Mat2& w,
                                                  const Eigen::Matrix<double, 2, Cols>& x) {
  Eigen::Matrix<double, 2, Cols> out;
  out.row(0) = x.row(0) / w(0, 0);
  out.row(1) = (x.row(1) - w(1, 0) * out.row(0)) / w(1, 1);
  return out;
}

// W_r^{-1} H_x with Sigma_r = Sigma_z + H_p Sigma_p H_p^T = W_r W_r^T.
// Throws NotPositiveDefinite when Sigma_r has no Cholesky factor.
Mat26 whiten_rows(const Mat26& H_x, const Mat23& H_p, const Mat2& sigma_z, const Mat3& sigma_p);

FeatureBlock residual_whiten(const Mat26& H_x, const Mat23& H_p, const Mat2& sigma_z,
                             const Mat3& sigma_p, std::size_t feature_id = 0);

// (base_sigma_px * scale_factor^level)^2 * I.
Mat2 scale_level_cov(int level, double scale_factor, double base_sigma_px = 1.0);

// (H_c^T H_c)^{-1} for the stacked blocks. Throws RankDeficient when the
// stacked matrix has rank below 6.
Mat6 pose_covariance(std::span<const FeatureBlock> blocks);

}  // namespace gfm
