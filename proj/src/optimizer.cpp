#include "gfm/optimizer.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "gfm/error.hpp"
#include "gfm/metrics.hpp"
#include "gfm/uncertainty.hpp"

namespace gfm {

namespace {

struct NormalEquations {
  Mat6 hessian = Mat6::Zero();
  Vec6 gradient = Vec6::Zero();
  double cost = 0.0;
};

// Lower Cholesky factors of Sigma_z + H_p Sigma_p H_p^T, built exactly as the
// selection blocks are. They are evaluated once at the initial pose: with
// pose-dependent weights the cost is not a fixed objective and creeps upward
// after convergence.
struct Weights {
  Mat2 left;
  Mat2 right = Mat2::Identity();
};

std::vector<Weights> weights_at(const CameraModel& cam, std::span<const MatchedObservation> obs,
                                const Pose& pose) {
  std::vector<Weights> out;
  out.reserve(obs.size());
  for (const auto& o : obs) {
    Weights w;
    w.left = residual_factor(measurement_jacobians(cam, pose, o.map_point).H_p, o.sigma_z, o.sigma_p);
    if (o.right_pixel) {
      w.right = residual_factor(measurement_jacobians_right(cam, pose, o.map_point).H_p,
                                o.right_sigma_z, o.sigma_p);
    }
    out.push_back(w);
  }
  return out;
}

NormalEquations linearize(const CameraModel& cam, std::span<const MatchedObservation> obs,
                          std::span<const Weights> weights, const Pose& pose) {
  NormalEquations ne;
  auto accumulate = [&ne](const Mat26& h_x, const Vec2& residual, const Mat2& w) {
    const Vec2 r = forward_substitute<1>(w, residual);
    const Mat26 jw = forward_substitute<6>(w, h_x);
    ne.hessian.noalias() += jw.transpose() * jw;
    ne.gradient.noalias() += jw.transpose() * r;
    ne.cost += 0.5 * r.squaredNorm();
  };
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    try {
      accumulate(measurement_jacobians(cam, pose, o.map_point).H_x,
                 o.pixel - project_world(cam, pose, o.map_point), weights[i].left);
      if (o.right_pixel) {
        accumulate(measurement_jacobians_right(cam, pose, o.map_point).H_x,
                   *o.right_pixel - project_world_right(cam, pose, o.map_point), weights[i].right);
      }
    } catch (const BehindCamera& e) {
      throw Diverged(std::string("iterate moved a point behind the camera: ") + e.what());
    }
  }
  return ne;
}

}  // namespace

SolveReport gauss_newton(const CameraModel& cam, std::span<const MatchedObservation> observations,
                         const Pose& init, const GaussNewtonOptions& options) {
  if (observations.size() < 3) {
    throw RankDeficient("need at least 3 observations, got " + std::to_string(observations.size()));
  }
  std::vector<Weights> weights;
  try {
    weights = weights_at(cam, observations, init);
  } catch (const BehindCamera& e) {
    throw Diverged(std::string("initial pose puts a point behind the camera: ") + e.what());
  }
  SolveReport report;
  report.pose = init;
  double previous_cost = std::numeric_limits<double>::infinity();
  int consecutive_rises = 0;

  for (std::size_t iter = 1; iter <= options.max_iterations; ++iter) {
    const auto ne = linearize(cam, observations, weights, report.pose);
    // Rounding noise at the optimum is not a rise.
    if (ne.cost > previous_cost * (1.0 + 1e-12) + 1e-15) {
      if (++consecutive_rises >= 2) {
        throw Diverged("cost increased on two consecutive iterations");
      }
    } else {
      consecutive_rises = 0;
    }
    previous_cost = ne.cost;

    const auto eig = symmetric_eigenvalues(ne.hessian);
    if (!(eig.front() > 0.0) || eig.back() <= 1e-12 * eig.front()) {
      throw RankDeficient("normal matrix is singular");
    }
    const Vec6 step = ne.hessian.llt().solve(ne.gradient);
    report.pose = retract(report.pose, step);
    report.iterations = iter;
    if (step.norm() < options.tolerance) {
      report.converged = true;
      break;
    }
  }
  report.final_cost = linearize(cam, observations, weights, report.pose).cost;
  return report;
}

PoseError pose_error(const Pose& estimate, const Pose& truth) {
  PoseError e;
  e.translational = (estimate.camera_center() - truth.camera_center()).norm();
  const Mat3 d = estimate.rotation() * truth.rotation().transpose();
  const double s = 0.5 * Vec3(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)).norm();
  const double c = 0.5 * (d.trace() - 1.0);
  e.rotational = std::atan2(s, c) * 180.0 / M_PI;
  return e;
}

}  // namespace gfm
