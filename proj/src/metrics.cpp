#include "gfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace gfm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Pivots below this fraction of the largest diagonal entry are treated as
// exact zeros: Cholesky of a singular matrix leaves round-off sized pivots.
constexpr double kPivotTolerance = 4.0 * std::numeric_limits<double>::epsilon();
constexpr double kJacobiTolerance = 1e-12;
constexpr int kJacobiMaxSweeps = 64;

}  // namespace

std::string_view to_string(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::kMaxTrace: return "MaxTrace";
    case MetricKind::kMinCond: return "MinCond";
    case MetricKind::kMaxMinEigenValue: return "MaxMinEigenValue";
    case MetricKind::kMaxLogDet: return "MaxLogDet";
  }
  return "Unknown";
}

std::optional<MetricKind> parse_metric(std::string_view name) noexcept {
  for (MetricKind kind : kAllMetrics) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

InfoMatrix::InfoMatrix(double prior_lambda)
    : m_(prior_lambda * Mat6::Identity()), prior_lambda_(prior_lambda) {}

InfoMatrix InfoMatrix::from_matrix(const Mat6& m, double prior_lambda) {
  InfoMatrix out(prior_lambda);
  out.m_ = m;
  return out;
}

double log_det(const Mat6& m) {
  const double scale = m.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return -kInf;
  const double floor = kPivotTolerance * scale;

  // In-place lower Cholesky on a copy; only the lower triangle is read.
  Mat6 l = m;
  double sum = 0.0;
  for (int j = 0; j < 6; ++j) {
    double pivot = l(j, j);
    for (int p = 0; p < j; ++p) pivot -= l(j, p) * l(j, p);
    if (!(pivot > floor)) return -kInf;
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    sum += 2.0 * std::log(d);
    for (int i = j + 1; i < 6; ++i) {
      double v = l(i, j);
      for (int p = 0; p < j; ++p) v -= l(i, p) * l(j, p);
      l(i, j) = v / d;
    }
  }
  return sum;
}

std::array<double, 6> symmetric_eigenvalues(const Mat6& m) {
  Mat6 a = 0.5 * (m + m.transpose());
  const double norm = a.norm();
  std::array<double, 6> out{};
  if (norm == 0.0) return out;

  auto off_norm = [&a] {
    double s = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < kJacobiMaxSweeps && off_norm() >= kJacobiTolerance * norm; ++sweep) {
    for (int p = 0; p < 5; ++p) {
      for (int q = p + 1; q < 6; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 6; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < 6; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  for (int i = 0; i < 6; ++i) out[i] = a(i, i);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

double evaluate(MetricKind kind, const Mat6& m) {
  switch (kind) {
    case MetricKind::kMaxTrace:
      return m.trace();
    case MetricKind::kMinCond: {
      const auto eig = symmetric_eigenvalues(m);
      if (!(eig.back() > 0.0)) return kInf;
      return eig.front() / eig.back();
    }
    case MetricKind::kMaxMinEigenValue:
      return symmetric_eigenvalues(m).back();
    case MetricKind::kMaxLogDet:
      return log_det(m);
  }
  return 0.0;
}

double logdet_gain(const Mat6& m, double log_det_m, const Mat6& block_information) {
  const double after = log_det(m + block_information);
  if (std::isinf(log_det_m) && log_det_m < 0.0) {
    return std::isinf(after) ? 0.0 : kInf;
  }
  return after - log_det_m;
}

double logdet_gain(const InfoMatrix& m, const FeatureBlock& block) {
  return logdet_gain(m.matrix(), log_det(m.matrix()), block.information());
}

double hadamard_bound(const Vec6& diagonal) {
  double sum = 0.0;
  for (int i = 0; i < 6; ++i) sum += std::log(diagonal[i]);
  return sum;
}

}  // namespace gfm
