#include "gfm/uncertainty.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "gfm/error.hpp"
#include "gfm/metrics.hpp"

namespace gfm {

namespace {

constexpr double kRankTolerance = 1e-12;

bool is_symmetric(const auto& m, double tol) { return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol; }

}  // namespace

void NoiseModel::validate() const {
  if (!is_symmetric(sigma_z, 1e-12) || Eigen::SelfAdjointEigenSolver<Mat2>(sigma_z).eigenvalues().minCoeff() <= 0.0) {
    throw InvalidArgument("sigma_z must be symmetric positive definite");
  }
  if (!is_symmetric(sigma_p, 1e-12) || Eigen::SelfAdjointEigenSolver<Mat3>(sigma_p).eigenvalues().minCoeff() < -1e-15) {
    throw InvalidArgument("sigma_p must be symmetric positive semi-definite");
  }
  if (!(pyramid_scale_factor > 1.0)) throw InvalidArgument("pyramid_scale_factor must exceed 1");
}

FeatureBlock::FeatureBlock(std::size_t feature_id, const Mat26& left_rows)
    : feature_id_(feature_id), rows_(left_rows) {
  if (!left_rows.allFinite()) throw InvalidArgument("feature block has non-finite entries");
}

FeatureBlock::FeatureBlock(std::size_t feature_id, const Mat26& left_rows, const Mat26& right_rows)
    : feature_id_(feature_id), rows_(4, 6) {
  if (!left_rows.allFinite() || !right_rows.allFinite()) {
    throw InvalidArgument("feature block has non-finite entries");
  }
  rows_.topRows<2>() = left_rows;
  rows_.bottomRows<2>() = right_rows;
}

FeatureBlock FeatureBlock::with_right_rows(const Mat26& right_rows) const {
  if (stereo_matched()) throw InvalidArgument("feature block already carries right rows");
  return FeatureBlock(feature_id_, rows_.topRows<2>(), right_rows);
}

Mat2 residual_factor(const Mat23& H_p, const Mat2& sigma_z, const Mat3& sigma_p) {
  const Mat2 sigma_r = sigma_z + H_p * sigma_p * H_p.transpose();
  const double a = sigma_r(0, 0);
  if (!(a > 0.0)) throw NotPositiveDefinite("residual covariance has non-positive leading entry");
  Mat2 w = Mat2::Zero();
  w(0, 0) = std::sqrt(a);
  w(1, 0) = sigma_r(1, 0) / w(0, 0);
  const double d = sigma_r(1, 1) - w(1, 0) * w(1, 0);
  if (!(d > 0.0)) throw NotPositiveDefinite("residual covariance is not positive definite");
  w(1, 1) = std::sqrt(d);
  return w;
}

Mat26 whiten_rows(const Mat26& H_x, const Mat23& H_p, const Mat2& sigma_z, const Mat3& sigma_p) {
  return forward_substitute(residual_factor(H_p, sigma_z, sigma_p), H_x);
}

FeatureBlock residual_whiten(const Mat26& H_x, const Mat23& H_p, const Mat2& sigma_z,
                             const Mat3& sigma_p, std::size_t feature_id) {
  return FeatureBlock(feature_id, whiten_rows(H_x, H_p, sigma_z, sigma_p));
}

Mat2 scale_level_cov(int level, double scale_factor, double base_sigma_px) {
  if (level < 0) throw InvalidArgument("pyramid level must be non-negative");
  if (!(scale_factor > 1.0)) throw InvalidArgument("scale factor must exceed 1");
  const double sigma = base_sigma_px * std::pow(scale_factor, level);
  return (sigma * sigma) * Mat2::Identity();
}

Mat6 pose_covariance(std::span<const FeatureBlock> blocks) {
  Mat6 info = Mat6::Zero();
  for (const auto& block : blocks) info.noalias() += block.information();

  const auto eig = symmetric_eigenvalues(info);
  if (!(eig.front() > 0.0) || eig.back() <= kRankTolerance * eig.front()) {
    throw RankDeficient("stacked whitened Jacobian has rank < 6 (" +
                        std::to_string(blocks.size()) + " blocks)");
  }
  Eigen::LLT<Mat6> llt(info);
  if (llt.info() != Eigen::Success) throw RankDeficient("information matrix not positive definite");
  Mat6 cov = llt.solve(Mat6::Identity());
  return 0.5 * (cov + cov.transpose());
}

}  // namespace gfm
