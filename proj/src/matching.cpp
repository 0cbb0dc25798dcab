#include "gfm/matching.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "gfm/error.hpp"
#include "gfm/kernels.hpp"
#include "gfm/metrics.hpp"
#include "gfm/selection.hpp"

namespace gfm {

namespace {

using Clock = std::chrono::steady_clock;

struct Candidate {
  const MapPoint* point = nullptr;
  MeasurementJacobians jacobians;
  Mat6 prior_information;
};

std::vector<Candidate> collect_candidates(std::span<const MapPoint> points,
                                          const CameraModel& cam, const Pose& pose_guess) {
  std::vector<Candidate> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (pose_guess.transform(p.position).z() < cam.min_depth) continue;
    if (!cam.in_image(project_world(cam, pose_guess, p.position))) continue;
    Candidate c;
    c.point = &p;
    c.jacobians = measurement_jacobians(cam, pose_guess, p.position);
    // Constant unit measurement prior until the pyramid level is known.
    c.prior_information =
        residual_whiten(c.jacobians.H_x, c.jacobians.H_p, Mat2::Identity(), p.sigma_p, p.id)
            .information();
    out.push_back(c);
  }
  return out;
}

MatchSet run_matching(std::span<const MapPoint> points, std::size_t k, double t_max,
                      double epsilon, SimulatedMatcher& matcher, const CameraModel& cam,
                      const Pose& pose_guess, const MatchingOptions& options, bool stereo) {
  cam.validate();
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0,1)");
  if (!(options.prior_lambda > 0.0)) throw InvalidArgument("prior_lambda must be positive");

  MatchSet out;
  auto& stats = out.stats;
  const auto candidates = collect_candidates(points, cam, pose_guess);
  const std::size_t n = candidates.size();
  stats.candidates = n;
  if (!(t_max > 0.0)) {
    stats.budget_exhausted = true;
    return out;
  }
  if (k == 0 || n == 0) return out;

  const std::size_t s = sample_size(n, std::min(k, n), epsilon);
  stats.sample_size = s;
  RoundSampler sampler(n, options.seed);
  std::vector<double> gain(n, 0.0);
  Mat6 m = options.prior_lambda * Mat6::Identity();
  double ld = log_det(m);

  auto score = [&](std::size_t c) {
    gain[c] = logdet_gain(m, ld, candidates[c].prior_information);
    ++stats.gain_evaluations;
  };
  auto elapsed_since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };

  double t_accu = 0.0;
  while (out.triples.size() < k && !sampler.empty() && t_accu < t_max) {
    auto t0 = Clock::now();
    for (std::size_t c : sampler.draw_round(s)) score(c);
    t_accu += elapsed_since(t0);

    while (!sampler.empty() && t_accu < t_max) {
      t0 = Clock::now();
      kernels::CandidateScore best;
      for (std::size_t c : sampler.sample()) {
        const kernels::CandidateScore sc{gain[c], 0.0, c};
        if (kernels::better(sc, best)) best = sc;
      }
      if (!best.valid()) break;
      const Candidate& cand = candidates[best.index];
      const MapPoint& point = *cand.point;

      ++stats.match_attempts;
      const auto left = window_match(cam, point, pose_guess, FrameSide::kLeft, matcher);
      if (left) {
        const Mat2 sigma_left = scale_level_cov(left->level, options.scale_factor, options.base_sigma_px);
        FeatureBlock block(point.id, whiten_rows(cand.jacobians.H_x, cand.jacobians.H_p,
                                                 sigma_left, point.sigma_p));
        std::optional<FrameMeasurement> right;
        if (stereo) {
          ++stats.match_attempts;
          right = window_match(cam, point, pose_guess, FrameSide::kRight, matcher);
          if (right) {
            const auto jr = measurement_jacobians_right(cam, pose_guess, point.position);
            const Mat2 sigma_right =
                scale_level_cov(right->level, options.scale_factor, options.base_sigma_px);
            block = block.with_right_rows(whiten_rows(jr.H_x, jr.H_p, sigma_right, point.sigma_p));
          }
        }
        std::vector<std::size_t> batch;
        for (std::size_t c : sampler.sample()) batch.push_back(candidates[c].point->id);
        stats.accepted_batches.push_back(std::move(batch));
        stats.accepted_gains.push_back(gain[best.index]);
        m += block.information();
        ld = log_det(m);
        stats.log_dets.push_back(ld);
        out.triples.push_back({point.id, *left, right, std::move(block)});
        sampler.remove(best.index);
        t_accu += elapsed_since(t0);
        break;
      }
      sampler.remove(best.index);
      if (sampler.replenish()) score(sampler.sample().back());
      t_accu += elapsed_since(t0);
    }
  }
  stats.elapsed = t_accu;
  stats.budget_exhausted = !(t_accu < t_max);
  return out;
}

}  // namespace

void MatcherSim::validate() const {
  // A zero radius is allowed: it only accepts an exact hit.
  if (!(window_radius >= 0.0)) throw InvalidArgument("window_radius must be non-negative");
  if (!(miss_probability >= 0.0 && miss_probability < 1.0)) {
    throw InvalidArgument("miss_probability must lie in [0,1)");
  }
  if (right_miss_probability && !(*right_miss_probability >= 0.0 && *right_miss_probability < 1.0)) {
    throw InvalidArgument("right_miss_probability must lie in [0,1)");
  }
}

SimulatedMatcher::SimulatedMatcher(const MatcherSim& sim, const FrameMeasurements& frame)
    : sim_(sim), frame_(&frame), rng_(sim.seed) {
  sim_.validate();
  for (std::size_t i = 0; i < frame.left.size(); ++i) {
    if (frame.left[i].point_id) left_by_point_.emplace(*frame.left[i].point_id, i);
  }
  for (std::size_t i = 0; i < frame.right.size(); ++i) {
    if (frame.right[i].point_id) right_by_point_.emplace(*frame.right[i].point_id, i);
  }
}

std::optional<FrameMeasurement> SimulatedMatcher::match(const CameraModel& cam,
                                                        const MapPoint& point,
                                                        const Pose& pose_guess, FrameSide side) {
  ++attempts_;
  const bool is_left = side == FrameSide::kLeft;
  const auto& index = is_left ? left_by_point_ : right_by_point_;
  const auto it = index.find(point.id);
  if (it == index.end()) return std::nullopt;

  Vec2 predicted;
  try {
    predicted = is_left ? project_world(cam, pose_guess, point.position)
                        : project_world_right(cam, pose_guess, point.position);
  } catch (const BehindCamera&) {
    return std::nullopt;
  }
  const FrameMeasurement& m = is_left ? frame_->left[it->second] : frame_->right[it->second];
  if ((m.pixel - predicted).cwiseAbs().maxCoeff() > sim_.window_radius) return std::nullopt;

  const double miss = is_left ? sim_.miss_probability
                              : sim_.right_miss_probability.value_or(sim_.miss_probability);
  if (rng_.bernoulli(miss)) return std::nullopt;
  return m;
}

std::optional<FrameMeasurement> window_match(const CameraModel& cam, const MapPoint& point,
                                             const Pose& pose_guess, FrameSide side,
                                             SimulatedMatcher& matcher) {
  return matcher.match(cam, point, pose_guess, side);
}

MatchSet good_feature_matching_mono(std::span<const MapPoint> points, std::size_t k,
                                    double t_max, double epsilon, SimulatedMatcher& matcher,
                                    const CameraModel& camera, const Pose& pose_guess,
                                    const MatchingOptions& options) {
  return run_matching(points, k, t_max, epsilon, matcher, camera, pose_guess, options, false);
}

MatchSet good_feature_matching_stereo(std::span<const MapPoint> points, std::size_t k,
                                      double t_max, double epsilon, SimulatedMatcher& matcher,
                                      const CameraModel& camera, const Pose& pose_guess,
                                      const MatchingOptions& options) {
  if (!camera.is_stereo()) throw InvalidArgument("stereo matching requires a positive baseline");
  return run_matching(points, k, t_max, epsilon, matcher, camera, pose_guess, options, true);
}

std::size_t matching_budget(std::size_t good_feature_target, std::size_t keyframe_matches) noexcept {
  return good_feature_target > keyframe_matches ? good_feature_target - keyframe_matches : 0;
}

FrameMeasurements simulate_frame(const Scenario& scenario, const FrameSimConfig& config) {
  if (config.max_level < 0) throw InvalidArgument("max_level must be non-negative");
  const CameraModel& cam = scenario.config.camera;
  Rng rng(config.seed);
  FrameMeasurements frame;
  const auto levels = static_cast<std::uint64_t>(config.max_level) + 1;

  for (const auto& meas : scenario.measurements) {
    const Vec3& p = scenario.points_true[meas.point];
    const int level = static_cast<int>(draw_below(rng.engine(), levels));
    const double sigma = config.pixel_sigma * std::pow(config.scale_factor, level);
    Vec2 left = project_world(cam, scenario.true_pose, p);
    left.x() += rng.gaussian(sigma);
    left.y() += rng.gaussian(sigma);
    frame.left.push_back({left, level, meas.point});
    if (!cam.is_stereo()) continue;
    Vec2 right = project_world_right(cam, scenario.true_pose, p);
    if (!cam.in_image(right)) continue;
    right.x() += rng.gaussian(sigma);
    right.y() += rng.gaussian(sigma);
    frame.right.push_back({right, level, meas.point});
  }

  auto add_clutter = [&](std::vector<FrameMeasurement>& side) {
    for (std::size_t i = 0; i < config.clutter; ++i) {
      const Vec2 px(rng.uniform(0.0, cam.width), rng.uniform(0.0, cam.height));
      side.push_back({px, static_cast<int>(draw_below(rng.engine(), levels)), std::nullopt});
    }
  };
  add_clutter(frame.left);
  if (cam.is_stereo()) add_clutter(frame.right);
  return frame;
}

std::vector<MapPoint> map_points_from(const Scenario& scenario) {
  const double var = scenario.config.map_sigma * scenario.config.map_sigma;
  std::vector<MapPoint> out;
  out.reserve(scenario.points_map.size());
  for (std::size_t i = 0; i < scenario.points_map.size(); ++i) {
    out.push_back({i, scenario.points_map[i], var * Mat3::Identity(), 0});
  }
  return out;
}

}  // namespace gfm
