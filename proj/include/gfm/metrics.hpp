#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "gfm/geometry.hpp"
#include "gfm/uncertainty.hpp"

namespace gfm {

// Matrix-revealing metrics over the 6x6 pose information matrix.
enum class MetricKind { kMaxTrace, kMinCond, kMaxMinEigenValue, kMaxLogDet };

inline constexpr std::array<MetricKind, 4> kAllMetrics = {
    MetricKind::kMaxTrace, MetricKind::kMinCond, MetricKind::kMaxMinEigenValue,
    MetricKind::kMaxLogDet};

// Every metric is maximized except MinCond.
constexpr bool maximizes(MetricKind kind) noexcept { return kind != MetricKind::kMinCond; }

std::string_view to_string(MetricKind kind) noexcept;
std::optional<MetricKind> parse_metric(std::string_view name) noexcept;

// Symmetric 6x6 accumulator lambda*I + sum_i H_c(i)^T H_c(i).
class InfoMatrix {
 public:
  explicit InfoMatrix(double prior_lambda = 0.0);
  // Wraps an existing symmetric PSD matrix; prior_lambda is bookkeeping only.
  static InfoMatrix from_matrix(const Mat6& m, double prior_lambda = 0.0);

  const Mat6& matrix() const noexcept { return m_; }
  double prior_lambda() const noexcept { return prior_lambda_; }

  void add(const FeatureBlock& block) { m_.noalias() += block.information(); }
  void add_information(const Mat6& info) { m_ += info; }

 private:
  Mat6 m_;
  double prior_lambda_;
};

// log det via Cholesky; -infinity when the matrix is not positive definite.
double log_det(const Mat6& m);

// Eigenvalues in descending order from cyclic Jacobi rotations.
std::array<double, 6> symmetric_eigenvalues(const Mat6& m);

// MaxTrace: trace. MinCond: lambda_max / lambda_min (+inf when singular).
// MaxMinEigenValue: lambda_min. MaxLogDet: log det (-inf when singular).
double evaluate(MetricKind kind, const Mat6& m);
inline double evaluate(MetricKind kind, const InfoMatrix& m) { return evaluate(kind, m.matrix()); }

// logDet(M + B^T B) - logDet(M). Both sides singular gives 0; a singular M
// made regular by the block gives +inf.
double logdet_gain(const InfoMatrix& m, const FeatureBlock& block);
double logdet_gain(const Mat6& m, double log_det_m, const Mat6& block_information);

// Hadamard upper bound sum_i log(Q_ii) on log det of any SPD Q with the
// given diagonal.
double hadamard_bound(const Vec6& diagonal);

}  // namespace gfm
