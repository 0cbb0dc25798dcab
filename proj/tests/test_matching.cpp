#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "gfm/error.hpp"
#include "gfm/matching.hpp"
#include "gfm/metrics.hpp"
#include "gfm/selection.hpp"
#include "test_util.hpp"

namespace gfm {
namespace {

constexpr double kNoBudget = 1e9;

struct World {
  Scenario scenario;
  std::vector<MapPoint> points;
  FrameMeasurements frame;
  CameraModel cam;
};

World make_world(std::uint64_t seed, std::size_t n_points = 300, double pixel_sigma = 1.0,
                 int max_level = 3, std::size_t clutter = 0, double map_sigma = 0.02) {
  ScenarioConfig c;
  c.map_sigma = map_sigma;
  c.n_points = n_points;
  c.seed = seed;
  c.camera.baseline = 0.11;
  World w;
  w.scenario = generate_scenario(c);
  w.points = map_points_from(w.scenario);
  FrameSimConfig fc;
  fc.pixel_sigma = pixel_sigma;
  fc.max_level = max_level;
  fc.clutter = clutter;
  fc.seed = seed + 1000;
  w.frame = simulate_frame(w.scenario, fc);
  w.cam = c.camera;
  return w;
}

MatcherSim perfect() {
  MatcherSim sim;
  sim.window_radius = 50.0;
  return sim;
}

// Points that project inside the image under the guess, in id order.
std::vector<std::size_t> predicted_ids(const World& w, const Pose& guess) {
  std::vector<std::size_t> out;
  for (const auto& p : w.points) {
    if (guess.transform(p.position).z() < w.cam.min_depth) continue;
    if (w.cam.in_image(project_world(w.cam, guess, p.position))) out.push_back(p.id);
  }
  return out;
}

TEST(Matching, PerfectMatcherFindsEveryVisiblePoint) {
  const auto w = make_world(1);
  SimulatedMatcher m(perfect(), w.frame);
  for (const auto& meas : w.scenario.measurements) {
    const auto got = m.match(w.cam, w.points[meas.point], w.scenario.true_pose, FrameSide::kLeft);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got->point_id, meas.point);
  }
  EXPECT_EQ(m.attempts(), w.scenario.measurements.size());
}

TEST(Matching, ZeroWindowAlmostNeverMatches) {
  const auto w = make_world(2, 1000);
  MatcherSim sim;
  sim.window_radius = 0.0;
  SimulatedMatcher m(sim, w.frame);
  int hits = 0, queries = 0;
  while (queries < 10000) {
    for (const auto& meas : w.scenario.measurements) {
      hits += m.match(w.cam, w.points[meas.point], w.scenario.true_pose, FrameSide::kLeft).has_value();
      if (++queries == 10000) break;
    }
  }
  EXPECT_LT(hits, 100);
}

TEST(Matching, MissProbabilityIsBinomial) {
  const auto w = make_world(3, 1000);
  MatcherSim sim = perfect();
  sim.miss_probability = 0.5;
  SimulatedMatcher m(sim, w.frame);
  int hits = 0, n = 0;
  for (int rep = 0; rep < 10; ++rep) {
    for (const auto& meas : w.scenario.measurements) {
      hits += m.match(w.cam, w.points[meas.point], w.scenario.true_pose, FrameSide::kLeft).has_value();
      ++n;
    }
  }
  const double sd = std::sqrt(n * 0.25);
  EXPECT_NEAR(hits, 0.5 * n, 3.0 * sd);
}

TEST(Matching, MatcherValidation) {
  FrameMeasurements f;
  MatcherSim sim;
  sim.miss_probability = 1.0;
  EXPECT_THROW(SimulatedMatcher(sim, f), InvalidArgument);
  sim = MatcherSim{};
  sim.window_radius = -1.0;
  EXPECT_THROW(SimulatedMatcher(sim, f), InvalidArgument);
}

TEST(Matching, ClutterNeverMatchesAndStaysInImage) {
  const auto w = make_world(4, 300, 1.0, 3, 500);
  std::size_t clutter = 0;
  for (const auto& side : {w.frame.left, w.frame.right}) {
    for (const auto& m : side) {
      EXPECT_TRUE(w.cam.in_image(m.pixel));
      clutter += !m.point_id.has_value();
    }
  }
  EXPECT_EQ(clutter, 1000u);
  SimulatedMatcher m(perfect(), w.frame);
  for (const auto& meas : w.scenario.measurements) {
    const auto got = m.match(w.cam, w.points[meas.point], w.scenario.true_pose, FrameSide::kLeft);
    ASSERT_TRUE(got.has_value());
    EXPECT_TRUE(got->point_id.has_value());
  }
}

TEST(Matching, ZeroBudgetGivesEmptySet) {
  const auto w = make_world(5);
  SimulatedMatcher m(perfect(), w.frame);
  const auto ms = good_feature_matching_mono(w.points, 50, 0.0, 0.1, m, w.cam, w.scenario.true_pose);
  EXPECT_TRUE(ms.triples.empty());
  EXPECT_TRUE(ms.stats.budget_exhausted);
  EXPECT_EQ(ms.stats.match_attempts, 0u);
}

TEST(Matching, LargeKMatchesEverything) {
  const auto w = make_world(6);
  SimulatedMatcher m(perfect(), w.frame);
  const auto ms = good_feature_matching_mono(w.points, 10000, kNoBudget, 0.1, m, w.cam,
                                             w.scenario.true_pose);
  std::set<std::size_t> got;
  for (const auto& t : ms.triples) got.insert(t.map_point_id);
  std::set<std::size_t> expected;
  for (const auto& meas : w.scenario.measurements) expected.insert(meas.point);
  EXPECT_EQ(got, expected);
  EXPECT_EQ(ms.triples.size(), expected.size());
}

TEST(Matching, InvariantsOfAcceptedMatches) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto w = make_world(10 + seed, 400);
    Rng rng(seed);
    const Pose guess = retract(w.scenario.true_pose, testing::random_tangent(rng, 0.01, 0.005));
    MatcherSim sim;
    sim.window_radius = 15.0;
    sim.miss_probability = 0.3;
    sim.seed = seed;
    SimulatedMatcher m(sim, w.frame);
    MatchingOptions opts;
    opts.seed = seed;
    const std::size_t k = 60;
    const auto ms = good_feature_matching_mono(w.points, k, kNoBudget, 0.1, m, w.cam, guess, opts);
    ASSERT_EQ(ms.triples.size(), k);
    EXPECT_EQ(ms.stats.match_attempts, m.attempts());

    std::set<std::size_t> ids;
    Mat6 acc = opts.prior_lambda * Mat6::Identity();
    double previous = testing::reference_log_det(acc);
    for (std::size_t a = 0; a < ms.triples.size(); ++a) {
      const auto& t = ms.triples[a];
      EXPECT_TRUE(ids.insert(t.map_point_id).second);
      const Vec2 pred = project_world(w.cam, guess, w.points[t.map_point_id].position);
      EXPECT_LE((t.left.pixel - pred).cwiseAbs().maxCoeff(), sim.window_radius);

      // The winner had the largest prior gain in its batch.
      const auto& batch = ms.stats.accepted_batches[a];
      EXPECT_NE(std::find(batch.begin(), batch.end(), t.map_point_id), batch.end());
      auto prior_gain = [&](std::size_t id) {
        const auto j = measurement_jacobians(w.cam, guess, w.points[id].position);
        const Mat6 info = residual_whiten(j.H_x, j.H_p, Mat2::Identity(), w.points[id].sigma_p).information();
        return testing::reference_log_det(acc + info) - testing::reference_log_det(acc);
      };
      const double winner = prior_gain(t.map_point_id);
      for (std::size_t id : batch) EXPECT_LE(prior_gain(id), winner + 1e-9 * std::max(1.0, std::abs(winner)));

      acc += t.block.information();
      const double now = testing::reference_log_det(acc);
      EXPECT_GT(now, previous);
      EXPECT_NEAR(ms.stats.log_dets[a], now, 5e-5);
      previous = now;
    }
  }
}

TEST(Matching, MatchedBlocksUseLevelCovariance) {
  const auto w = make_world(20);
  SimulatedMatcher m(perfect(), w.frame);
  const Pose& guess = w.scenario.true_pose;
  const auto ms = good_feature_matching_mono(w.points, 30, kNoBudget, 0.1, m, w.cam, guess);
  for (const auto& t : ms.triples) {
    const auto& p = w.points[t.map_point_id];
    const auto j = measurement_jacobians(w.cam, guess, p.position);
    const Mat26 expected = whiten_rows(j.H_x, j.H_p, scale_level_cov(t.left.level, 1.2), p.sigma_p);
    EXPECT_LT((t.block.rows() - expected).norm(), 1e-12 * expected.norm());
  }
}

TEST(Matching, SelectionEquivalenceWithPerfectMatcher) {
  // Without map noise every predicted point has a measurement, so no miss
  // perturbs the sample schedule.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = make_world(30 + seed, 300, 1.0, 0, 0, 0.0);
    const Pose& guess = w.scenario.true_pose;
    MatchingOptions opts;
    opts.seed = derive_seed(seed, {1});
    SimulatedMatcher m(perfect(), w.frame);
    const std::size_t k = 40;
    const auto ms = good_feature_matching_mono(w.points, k, kNoBudget, 0.1, m, w.cam, guess, opts);

    const auto ids = predicted_ids(w, guess);
    SelectionProblem p;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& pt = w.points[ids[i]];
      const auto j = measurement_jacobians(w.cam, guess, pt.position);
      p.blocks.push_back(residual_whiten(j.H_x, j.H_p, scale_level_cov(0, 1.2), pt.sigma_p, pt.id));
    }
    p.k = k;
    p.epsilon = 0.1;
    p.seed = opts.seed;
    const auto lazier = lazier_greedy_select(p);
    std::vector<std::size_t> expected;
    for (std::size_t c : lazier.chosen) expected.push_back(ids[c]);
    std::vector<std::size_t> got;
    for (const auto& t : ms.triples) got.push_back(t.map_point_id);
    EXPECT_EQ(got, expected) << "seed " << seed;
    EXPECT_EQ(ms.stats.gain_evaluations, lazier.gain_evaluations);
  }
}

TEST(Matching, StereoRequiresBaseline) {
  auto w = make_world(40);
  CameraModel mono = w.cam;
  mono.baseline = 0.0;
  SimulatedMatcher m(perfect(), w.frame);
  EXPECT_THROW(good_feature_matching_stereo(w.points, 10, kNoBudget, 0.1, m, mono, w.scenario.true_pose),
               InvalidArgument);
}

TEST(Matching, PerfectStereoGivesFourRowBlocks) {
  const auto w = make_world(41);
  SimulatedMatcher m(perfect(), w.frame);
  const auto ms = good_feature_matching_stereo(w.points, 50, kNoBudget, 0.1, m, w.cam, w.scenario.true_pose);
  ASSERT_EQ(ms.triples.size(), 50u);
  std::size_t with_right = 0;
  for (const auto& t : ms.triples) {
    // A point whose right projection leaves the image has no right measurement.
    const bool right_visible =
        w.cam.in_image(project_world_right(w.cam, w.scenario.true_pose, w.points[t.map_point_id].position));
    EXPECT_EQ(t.right.has_value(), right_visible);
    EXPECT_EQ(t.block.stereo_matched(), t.right.has_value());
    with_right += t.right.has_value();
  }
  EXPECT_GT(with_right, 40u);
}

TEST(Matching, StereoRowsOnlyAddInformation) {
  const auto w = make_world(42);
  MatcherSim sim = perfect();
  sim.right_miss_probability = 0.9;
  SimulatedMatcher m(sim, w.frame);
  const auto ms = good_feature_matching_stereo(w.points, 60, kNoBudget, 0.1, m, w.cam, w.scenario.true_pose);
  Mat6 stereo = 1e-6 * Mat6::Identity(), mono = stereo;
  std::size_t right = 0;
  for (const auto& t : ms.triples) {
    stereo += t.block.information();
    const auto top = t.block.rows().topRows<2>();
    mono += top.transpose() * top;
    right += t.right.has_value();
  }
  EXPECT_GT(right, 0u);
  EXPECT_LT(right, ms.triples.size());
  EXPECT_GE(testing::reference_log_det(stereo), testing::reference_log_det(mono));
}

TEST(Matching, SizeIsMonotoneInK) {
  const auto w = make_world(43);
  std::size_t previous = 0;
  for (std::size_t k : {0, 5, 20, 80, 200, 400}) {
    SimulatedMatcher m(perfect(), w.frame);
    const auto ms = good_feature_matching_mono(w.points, k, kNoBudget, 0.1, m, w.cam, w.scenario.true_pose);
    EXPECT_GE(ms.triples.size(), previous);
    EXPECT_LE(ms.triples.size(), k);
    previous = ms.triples.size();
  }
}

TEST(Matching, AttemptsBoundedWithPerfectMatcher) {
  const auto w = make_world(44, 1000);
  SimulatedMatcher m(perfect(), w.frame);
  const std::size_t k = 100;
  const auto ms = good_feature_matching_mono(w.points, k, kNoBudget, 0.1, m, w.cam, w.scenario.true_pose);
  EXPECT_LE(ms.stats.match_attempts, ms.stats.sample_size * k + k);
  EXPECT_LE(ms.stats.gain_evaluations, ms.stats.sample_size * k + ms.stats.match_attempts);
}

TEST(Matching, BudgetFormula) {
  EXPECT_EQ(matching_budget(100, 30), 70u);
  EXPECT_EQ(matching_budget(100, 130), 0u);
  EXPECT_EQ(matching_budget(0, 0), 0u);
}

TEST(Matching, FrameLevelsAndNoise) {
  const auto w = make_world(45, 2000, 1.0, 3);
  std::array<int, 4> per_level{};
  double sum2 = 0.0;
  int n0 = 0;
  std::size_t j = 0;
  for (const auto& meas : w.scenario.measurements) {
    const auto& f = w.frame.left[j++];
    ASSERT_EQ(*f.point_id, meas.point);
    ASSERT_GE(f.level, 0);
    ASSERT_LE(f.level, 3);
    ++per_level[f.level];
    if (f.level == 0) {
      sum2 += (f.pixel - project_world(w.cam, w.scenario.true_pose, w.scenario.points_true[meas.point])).squaredNorm();
      n0 += 2;
    }
  }
  for (int c : per_level) EXPECT_GT(c, 300);
  EXPECT_NEAR(std::sqrt(sum2 / n0), 1.0, 0.1);
}

}  // namespace
}  // namespace gfm
