#include "gfm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gfm/error.hpp"
#include "gfm/kernels.hpp"
#include "gfm/matching.hpp"
#include "gfm/optimizer.hpp"
#include "gfm/random.hpp"
#include "gfm/selection.hpp"
#include "gfm/uncertainty.hpp"

namespace gfm {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed stream tags; every random draw in an experiment is keyed by
// (base_seed, stream, grid coordinates, trial).
enum Stream : std::uint64_t {
  kWorld = 1,
  kRandomSubset,
  kLazierRun,
  kFrame,
  kGuess,
  kMatcher,
  kSampler,
  kMatchAll,
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Execution execution_for(const ExperimentSpec& spec) {
  return spec.workers == 1 ? Execution::kSerial : Execution::kParallel;
}

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

struct EstimationInputs {
  std::vector<FeatureBlock> blocks;
  std::vector<MatchedObservation> observations;
};

// Whitened blocks linearized at `linearization` (the motion-free prior pose)
// and the matching observations, one per measurement. A zero pixel sigma is
// weighted as 1 px; weights do not matter when the data are noiseless.
EstimationInputs build_inputs(const Scenario& s, const Pose& linearization) {
  const auto& cfg = s.config;
  const double sigma_w = cfg.pixel_sigma > 0.0 ? cfg.pixel_sigma : 1.0;
  const Mat2 sigma_z = (sigma_w * sigma_w) * Mat2::Identity();
  const Mat3 sigma_p = (cfg.map_sigma * cfg.map_sigma) * Mat3::Identity();

  EstimationInputs in;
  in.blocks.reserve(s.measurements.size());
  in.observations.reserve(s.measurements.size());
  for (std::size_t j = 0; j < s.measurements.size(); ++j) {
    const auto& meas = s.measurements[j];
    const Vec3& p = s.points_map[meas.point];
    const auto jac = measurement_jacobians(cfg.camera, linearization, p);
    in.blocks.push_back(residual_whiten(jac.H_x, jac.H_p, sigma_z, sigma_p, j));
    MatchedObservation o;
    o.map_point = p;
    o.pixel = meas.pixel;
    o.sigma_z = sigma_z;
    o.sigma_p = sigma_p;
    in.observations.push_back(o);
  }
  return in;
}

// Observations are solved in ascending index order so that equal subsets give
// bit-identical estimates regardless of pick order.
std::optional<Pose> solve_subset(const CameraModel& cam,
                                 const std::vector<MatchedObservation>& observations,
                                 std::vector<std::size_t> chosen, const Pose& init) {
  std::sort(chosen.begin(), chosen.end());
  std::vector<MatchedObservation> subset;
  subset.reserve(chosen.size());
  for (std::size_t i : chosen) subset.push_back(observations[i]);
  try {
    return gauss_newton(cam, subset, init).pose;
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct RmsAccumulator {
  double sum_t2 = 0.0;
  double sum_r2 = 0.0;
  std::size_t successes = 0;
  std::size_t failures = 0;

  void add(const std::optional<PoseError>& e) {
    if (!e) {
      ++failures;
      return;
    }
    sum_t2 += e->translational * e->translational;
    sum_r2 += e->rotational * e->rotational;
    ++successes;
  }
  double rms_t() const { return successes ? std::sqrt(sum_t2 / successes) : kNaN; }
  double rms_r() const { return successes ? std::sqrt(sum_r2 / successes) : kNaN; }
};

std::vector<Column> world_columns() {
  return {{"trials"},   {"base_seed"}, {"n_points"}, {"depth_min"}, {"depth_max"},
          {"motion_translation"},     {"motion_rotation"},      {"map_sigma"},
          {"fx"},       {"fy"},        {"cx"},       {"cy"},        {"width"},   {"height"}};
}

std::vector<Cell> world_cells(const ExperimentSpec& spec) {
  const auto& w = spec.world;
  const auto& c = w.camera;
  return {as_int(spec.trials),
          std::to_string(spec.base_seed),
          as_int(w.n_points),
          w.depth_min,
          w.depth_max,
          w.motion_translation,
          w.motion_rotation,
          w.map_sigma,
          c.fx,
          c.fy,
          c.cx,
          c.cy,
          static_cast<std::int64_t>(c.width),
          static_cast<std::int64_t>(c.height)};
}

template <typename T>
void append(std::vector<T>& a, std::vector<T> b) {
  a.insert(a.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
}

// A world whose first `n` visible measurements are kept; the point count is
// oversampled to cover points that leave the image after the motion.
Scenario world_with_visible(ScenarioConfig cfg, std::size_t n, std::uint64_t seed) {
  cfg.n_points = n + n / 4 + 16;
  for (int attempt = 0; attempt < 8; ++attempt) {
    cfg.seed = derive_seed(seed, {static_cast<std::uint64_t>(attempt)});
    Scenario s = generate_scenario(cfg);
    if (s.visible_count() >= n) {
      s.measurements.resize(n);
      return s;
    }
    cfg.n_points += cfg.n_points / 2;
  }
  throw Degenerate("could not generate a world with " + std::to_string(n) + " visible points");
}

// --- JSON overlay -----------------------------------------------------------

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

template <typename Handlers>
void for_each_key(const json& obj, const std::string& where, Handlers&& handle) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!handle(it.key(), it.value())) {
      throw ConfigError("unknown key '" + where + "." + it.key() + "'");
    }
  }
}

void overlay_camera(CameraModel& cam, const json& obj) {
  for_each_key(obj, "world.camera", [&](const std::string& k, const json& v) {
    if (k == "fx") cam.fx = get_as<double>(v, k);
    else if (k == "fy") cam.fy = get_as<double>(v, k);
    else if (k == "cx") cam.cx = get_as<double>(v, k);
    else if (k == "cy") cam.cy = get_as<double>(v, k);
    else if (k == "width") cam.width = get_as<int>(v, k);
    else if (k == "height") cam.height = get_as<int>(v, k);
    else if (k == "baseline") cam.baseline = get_as<double>(v, k);
    else if (k == "min_depth") cam.min_depth = get_as<double>(v, k);
    else return false;
    return true;
  });
}

void overlay_world(ScenarioConfig& w, const json& obj) {
  for_each_key(obj, "world", [&](const std::string& k, const json& v) {
    if (k == "n_points") w.n_points = get_as<std::size_t>(v, k);
    else if (k == "depth_min") w.depth_min = get_as<double>(v, k);
    else if (k == "depth_max") w.depth_max = get_as<double>(v, k);
    else if (k == "motion_translation") w.motion_translation = get_as<double>(v, k);
    else if (k == "motion_rotation") w.motion_rotation = get_as<double>(v, k);
    else if (k == "map_sigma") w.map_sigma = get_as<double>(v, k);
    else if (k == "camera") overlay_camera(w.camera, v);
    else return false;
    return true;
  });
}

void overlay_pose_opt(PoseOptParams& p, const json& obj) {
  for_each_key(obj, "pose_opt", [&](const std::string& k, const json& v) {
    if (k == "subset_sizes") p.subset_sizes = get_as<std::vector<std::size_t>>(v, k);
    else if (k == "pixel_sigmas") p.pixel_sigmas = get_as<std::vector<double>>(v, k);
    else if (k == "methods") {
      p.methods.clear();
      for (const auto& name : get_as<std::vector<std::string>>(v, k)) {
        const auto m = parse_pose_opt_method(name);
        if (!m) throw ConfigError("unknown method '" + name + "'");
        p.methods.push_back(*m);
      }
    } else return false;
    return true;
  });
}

void overlay_lazier(LazierParams& p, const json& obj) {
  for_each_key(obj, "lazier", [&](const std::string& k, const json& v) {
    if (k == "n_values") p.n_values = get_as<std::vector<std::size_t>>(v, k);
    else if (k == "k_values") p.k_values = get_as<std::vector<std::size_t>>(v, k);
    else if (k == "epsilons") p.epsilons = get_as<std::vector<double>>(v, k);
    else if (k == "repeats") p.repeats = get_as<std::size_t>(v, k);
    else if (k == "pixel_sigma") p.pixel_sigma = get_as<double>(v, k);
    else return false;
    return true;
  });
}

void overlay_matching(MatchingParams& p, const json& obj) {
  for_each_key(obj, "matching", [&](const std::string& k, const json& v) {
    if (k == "k_values") p.k_values = get_as<std::vector<std::size_t>>(v, k);
    else if (k == "epsilons") p.epsilons = get_as<std::vector<double>>(v, k);
    else if (k == "miss_probabilities") p.miss_probabilities = get_as<std::vector<double>>(v, k);
    else if (k == "modes") p.modes = get_as<std::vector<std::string>>(v, k);
    else if (k == "window_radius") p.window_radius = get_as<double>(v, k);
    else if (k == "t_max") p.t_max = get_as<double>(v, k);
    else if (k == "clutter") p.clutter = get_as<std::size_t>(v, k);
    else if (k == "max_level") p.max_level = get_as<int>(v, k);
    else if (k == "pixel_sigma") p.pixel_sigma = get_as<double>(v, k);
    else if (k == "baseline") p.baseline = get_as<double>(v, k);
    else if (k == "guess_translation") p.guess_translation = get_as<double>(v, k);
    else if (k == "guess_rotation") p.guess_rotation = get_as<double>(v, k);
    else return false;
    return true;
  });
}

void overlay_bounds(BoundsParams& p, const json& obj) {
  for_each_key(obj, "bounds", [&](const std::string& k, const json& v) {
    if (k == "k") p.k = get_as<std::size_t>(v, k);
    else if (k == "mu") p.mu = get_as<double>(v, k);
    else if (k == "epsilons") p.epsilons = get_as<std::vector<double>>(v, k);
    else if (k == "include_zero_point") p.include_zero_point = get_as<bool>(v, k);
    else return false;
    return true;
  });
}

std::vector<double> bounds_grid(const BoundsParams& b) {
  std::vector<double> eps = b.epsilons;
  if (eps.empty()) {
    for (int i = 1; i <= 180; ++i) eps.push_back(0.005 * i);
  }
  if (b.include_zero_point) {
    const double zero = std::exp(-b.mu) - std::exp(-1.0);
    if (zero > 0.0 && zero < 1.0 && std::find(eps.begin(), eps.end(), zero) == eps.end()) {
      eps.push_back(zero);
    }
  }
  std::sort(eps.begin(), eps.end());
  return eps;
}

}  // namespace

// --- names -------------------------------------------------------------------

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::kPoseOptMetrics: return "pose_opt_metrics";
    case ExperimentKind::kLazierBenchmark: return "lazier_benchmark";
    case ExperimentKind::kMatchingSim: return "matching_sim";
    case ExperimentKind::kBoundsCurve: return "bounds_curve";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) noexcept {
  for (auto k : {ExperimentKind::kPoseOptMetrics, ExperimentKind::kLazierBenchmark,
                 ExperimentKind::kMatchingSim, ExperimentKind::kBoundsCurve}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(PoseOptMethod method) noexcept {
  switch (method) {
    case PoseOptMethod::kMaxTrace: return "MaxTrace";
    case PoseOptMethod::kMinCond: return "MinCond";
    case PoseOptMethod::kMaxMinEigenValue: return "MaxMinEigenValue";
    case PoseOptMethod::kMaxLogDet: return "MaxLogDet";
    case PoseOptMethod::kRandom: return "Random";
    case PoseOptMethod::kAll: return "All";
  }
  return "unknown";
}

std::optional<PoseOptMethod> parse_pose_opt_method(std::string_view name) noexcept {
  for (auto m : {PoseOptMethod::kMaxTrace, PoseOptMethod::kMinCond, PoseOptMethod::kMaxMinEigenValue,
                 PoseOptMethod::kMaxLogDet, PoseOptMethod::kRandom, PoseOptMethod::kAll}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

// --- spec --------------------------------------------------------------------

void ExperimentSpec::validate() const {
  try {
    world.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (trials == 0) throw ConfigError("trials must be at least 1");
  auto require_nonempty = [](bool empty, const char* what) {
    if (empty) throw ConfigError(std::string(what) + " grid is empty");
  };
  auto require_epsilons = [](const std::vector<double>& eps) {
    for (double e : eps) {
      if (!(e > 0.0 && e < 1.0)) throw ConfigError("epsilon values must lie in (0,1)");
    }
  };
  switch (kind) {
    case ExperimentKind::kPoseOptMetrics:
      require_nonempty(pose_opt.subset_sizes.empty(), "subset_sizes");
      require_nonempty(pose_opt.pixel_sigmas.empty(), "pixel_sigmas");
      require_nonempty(pose_opt.methods.empty(), "methods");
      for (std::size_t k : pose_opt.subset_sizes) {
        if (k == 0 || k > world.n_points) {
          throw ConfigError("subset size " + std::to_string(k) + " outside [1, n_points=" +
                            std::to_string(world.n_points) + "]");
        }
      }
      for (double s : pose_opt.pixel_sigmas) {
        if (!(s >= 0.0)) throw ConfigError("pixel sigma must be non-negative");
      }
      break;
    case ExperimentKind::kLazierBenchmark:
      require_nonempty(lazier.n_values.empty(), "n_values");
      require_nonempty(lazier.k_values.empty(), "k_values");
      require_nonempty(lazier.epsilons.empty(), "epsilons");
      require_epsilons(lazier.epsilons);
      if (lazier.repeats == 0) throw ConfigError("repeats must be at least 1");
      for (std::size_t n : lazier.n_values) {
        for (std::size_t k : lazier.k_values) {
          if (k == 0 || k > n) throw ConfigError("lazier grid needs 1 <= k <= n");
        }
      }
      if (!(lazier.pixel_sigma >= 0.0)) throw ConfigError("pixel sigma must be non-negative");
      break;
    case ExperimentKind::kMatchingSim:
      require_nonempty(matching.k_values.empty(), "k_values");
      require_nonempty(matching.epsilons.empty(), "epsilons");
      require_nonempty(matching.miss_probabilities.empty(), "miss_probabilities");
      require_nonempty(matching.modes.empty(), "modes");
      require_epsilons(matching.epsilons);
      for (double p : matching.miss_probabilities) {
        if (!(p >= 0.0 && p < 1.0)) throw ConfigError("miss probability must lie in [0,1)");
      }
      for (const auto& m : matching.modes) {
        if (m != "mono" && m != "stereo") throw ConfigError("mode must be 'mono' or 'stereo'");
      }
      for (std::size_t k : matching.k_values) {
        if (k > world.n_points) throw ConfigError("matching k exceeds n_points");
      }
      if (!(matching.window_radius >= 0.0)) throw ConfigError("window_radius must be non-negative");
      if (!(matching.t_max >= 0.0)) throw ConfigError("t_max must be non-negative");
      if (!(matching.baseline > 0.0)) throw ConfigError("stereo baseline must be positive");
      if (matching.max_level < 0) throw ConfigError("max_level must be non-negative");
      if (!(matching.pixel_sigma > 0.0)) throw ConfigError("matching pixel sigma must be positive");
      break;
    case ExperimentKind::kBoundsCurve:
      if (!(bounds.mu > 0.0 && bounds.mu <= 1.0)) throw ConfigError("mu must lie in (0,1]");
      require_epsilons(bounds.epsilons);
      break;
  }
}

ExperimentSpec default_spec(ExperimentKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  switch (kind) {
    case ExperimentKind::kPoseOptMetrics: spec.trials = 100; break;
    case ExperimentKind::kLazierBenchmark: spec.trials = 20; break;
    case ExperimentKind::kMatchingSim:
      spec.trials = 100;
      spec.world.n_points = 1000;
      break;
    case ExperimentKind::kBoundsCurve: spec.trials = 1; break;
  }
  return spec;
}

void apply_full_scale(ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::kPoseOptMetrics:
    case ExperimentKind::kMatchingSim: spec.trials = 300; break;
    case ExperimentKind::kLazierBenchmark: spec.trials = 100; break;
    case ExperimentKind::kBoundsCurve: break;
  }
}

ExperimentSpec spec_from_json(ExperimentKind kind, std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentSpec spec = default_spec(kind);
  for_each_key(doc, "config", [&](const std::string& k, const json& v) {
    if (k == "kind") {
      const auto parsed = parse_experiment_kind(get_as<std::string>(v, k));
      if (!parsed || *parsed != kind) throw ConfigError("config kind does not match the subcommand");
    } else if (k == "trials") spec.trials = get_as<std::size_t>(v, k);
    else if (k == "base_seed") spec.base_seed = get_as<std::uint64_t>(v, k);
    else if (k == "workers") spec.workers = get_as<int>(v, k);
    else if (k == "world") overlay_world(spec.world, v);
    else if (k == "pose_opt") overlay_pose_opt(spec.pose_opt, v);
    else if (k == "lazier") overlay_lazier(spec.lazier, v);
    else if (k == "matching") overlay_matching(spec.matching, v);
    else if (k == "bounds") overlay_bounds(spec.bounds, v);
    else return false;
    return true;
  });
  spec.validate();
  return spec;
}

// --- error ratio -------------------------------------------------------------

double error_ratio(std::span<const Pose> lazier_estimates, std::span<const Pose> lazy_estimates,
                   std::span<const Pose> truths) {
  if (lazier_estimates.empty() || lazier_estimates.size() != lazy_estimates.size() ||
      lazy_estimates.size() != truths.size()) {
    throw InvalidArgument("error_ratio needs equal-length, non-empty sequences");
  }
  double diff2 = 0.0;
  double base2 = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double d = pose_error(lazier_estimates[i], lazy_estimates[i]).translational;
    const double b = pose_error(lazy_estimates[i], truths[i]).translational;
    diff2 += d * d;
    base2 += b * b;
  }
  const double n = static_cast<double>(truths.size());
  const double denom = std::sqrt(base2 / n);
  if (denom < 1e-12) throw DegenerateBaseline("lazy estimates coincide with the truth");
  return std::sqrt(diff2 / n) / denom;
}

// --- pose optimization under the four metrics -------------------------------

ExperimentReport run_pose_opt_metrics(const ExperimentSpec& spec) {
  spec.validate();
  const auto& p = spec.pose_opt;
  const std::size_t n_sigma = p.pixel_sigmas.size();
  const std::size_t n_k = p.subset_sizes.size();
  const std::size_t n_m = p.methods.size();
  const std::size_t k_max = *std::max_element(p.subset_sizes.begin(), p.subset_sizes.end());

  // errors[sigma][trial][k][method]
  using Cells = std::vector<std::optional<PoseError>>;
  std::vector<std::vector<Cells>> errors(n_sigma, std::vector<Cells>(spec.trials));
  std::vector<double> elapsed(n_sigma * spec.trials, 0.0);

  kernels::parallel_for(n_sigma * spec.trials, execution_for(spec), spec.workers, [&](std::size_t job) {
    const std::size_t si = job / spec.trials;
    const std::size_t trial = job % spec.trials;
    const auto t0 = Clock::now();
    Cells& out = errors[si][trial];
    out.assign(n_k * n_m, std::nullopt);

    ScenarioConfig cfg = spec.world;
    cfg.pixel_sigma = p.pixel_sigmas[si];
    cfg.seed = derive_seed(spec.base_seed, {kWorld, si, trial});
    Scenario world;
    try {
      world = generate_scenario(cfg);
    } catch (const Degenerate&) {
      return;  // every cell of this trial counts as a failure
    }
    const Pose init = Pose::identity();
    const auto inputs = build_inputs(world, init);
    const std::size_t visible = inputs.blocks.size();
    auto evaluate_subset = [&](const std::vector<std::size_t>& chosen) -> std::optional<PoseError> {
      const auto est = solve_subset(cfg.camera, inputs.observations, chosen, init);
      if (!est) return std::nullopt;
      return pose_error(*est, world.true_pose);
    };

    std::vector<std::size_t> all(visible);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::optional<std::optional<PoseError>> all_error;

    for (std::size_t mi = 0; mi < n_m; ++mi) {
      const PoseOptMethod method = p.methods[mi];
      std::vector<std::size_t> greedy_order;
      if (method <= PoseOptMethod::kMaxLogDet) {
        // Greedy picks are prefix-stable in k, so one run covers every size.
        SelectionProblem problem;
        problem.blocks = inputs.blocks;
        problem.k = std::min(k_max, visible);
        problem.metric = static_cast<MetricKind>(static_cast<int>(method));
        greedy_order = greedy_select(problem).chosen;
      }
      for (std::size_t ki = 0; ki < n_k; ++ki) {
        const std::size_t k = std::min(p.subset_sizes[ki], visible);
        std::optional<PoseError> e;
        if (method == PoseOptMethod::kAll || k == visible) {
          if (!all_error) all_error = evaluate_subset(all);
          e = *all_error;
        } else if (method == PoseOptMethod::kRandom) {
          SelectionProblem problem;
          problem.blocks = inputs.blocks;
          problem.k = k;
          problem.seed = derive_seed(spec.base_seed, {kRandomSubset, si, trial, ki});
          e = evaluate_subset(random_select(problem).chosen);
        } else {
          e = evaluate_subset({greedy_order.begin(), greedy_order.begin() + static_cast<std::ptrdiff_t>(k)});
        }
        out[ki * n_m + mi] = e;
      }
    }
    elapsed[job] = seconds_since(t0);
  });

  std::vector<Column> cols = {{"method"}, {"pixel_sigma"}, {"subset_size"}};
  append(cols, world_columns());
  append(cols, {{"successes"}, {"failures"}, {"rms_translation_m"}, {"rms_rotation_deg"},
                {"trial_time_s", true}});
  ExperimentReport report(cols);
  for (std::size_t si = 0; si < n_sigma; ++si) {
    double time_sum = 0.0;
    for (std::size_t t = 0; t < spec.trials; ++t) time_sum += elapsed[si * spec.trials + t];
    for (std::size_t ki = 0; ki < n_k; ++ki) {
      for (std::size_t mi = 0; mi < n_m; ++mi) {
        RmsAccumulator acc;
        for (std::size_t t = 0; t < spec.trials; ++t) {
          const auto& cells = errors[si][t];
          acc.add(cells.empty() ? std::nullopt : cells[ki * n_m + mi]);
        }
        std::vector<Cell> row = {std::string(to_string(p.methods[mi])), p.pixel_sigmas[si],
                                 as_int(p.subset_sizes[ki])};
        append(row, world_cells(spec));
        append(row, {as_int(acc.successes), as_int(acc.failures), acc.rms_t(), acc.rms_r(),
                     time_sum / static_cast<double>(spec.trials)});
        report.add_row(std::move(row));
      }
    }
  }
  return report;
}

// --- lazy vs lazier ------------------------------------------------------------

ExperimentReport run_lazier_benchmark(const ExperimentSpec& spec) {
  spec.validate();
  const auto& lp = spec.lazier;
  const std::size_t n_n = lp.n_values.size();
  const std::size_t n_k = lp.k_values.size();
  const std::size_t n_e = lp.epsilons.size();
  const std::size_t worlds = spec.trials;

  struct LazierStats {
    std::optional<double> error_ratio;
    double logdet_ratio_sum = 0.0;
    std::size_t successes = 0;
    std::size_t failures = 0;
    double evaluations_sum = 0.0;
    double time_sum = 0.0;
  };
  struct WorldResult {
    bool ok = false;
    std::size_t lazy_evaluations = 0;
    double lazy_time = 0.0;
    std::vector<LazierStats> per_epsilon;
  };
  // results[(ni * n_k + ki) * worlds + w]
  std::vector<WorldResult> results(n_n * n_k * worlds);

  kernels::parallel_for(results.size(), execution_for(spec), spec.workers, [&](std::size_t job) {
    const std::size_t w = job % worlds;
    const std::size_t ki = (job / worlds) % n_k;
    const std::size_t ni = job / (worlds * n_k);
    const std::size_t n = lp.n_values[ni];
    const std::size_t k = lp.k_values[ki];
    WorldResult& res = results[job];
    res.per_epsilon.resize(n_e);

    ScenarioConfig cfg = spec.world;
    cfg.pixel_sigma = lp.pixel_sigma;
    Scenario world;
    try {
      world = world_with_visible(cfg, n, derive_seed(spec.base_seed, {kWorld, ni, w}));
    } catch (const Degenerate&) {
      return;
    }
    const Pose init = Pose::identity();
    const auto inputs = build_inputs(world, init);

    SelectionProblem problem;
    problem.blocks = inputs.blocks;
    problem.k = k;
    const auto lazy = lazy_greedy_select(problem);
    res.lazy_evaluations = lazy.gain_evaluations;
    res.lazy_time = lazy.wall_time;
    const auto lazy_pose = solve_subset(cfg.camera, inputs.observations, lazy.chosen, init);
    if (!lazy_pose) return;
    const double lazy_value = normalized_log_det(problem.blocks, lazy.chosen, problem.prior_lambda);

    for (std::size_t ei = 0; ei < n_e; ++ei) {
      LazierStats& st = res.per_epsilon[ei];
      problem.epsilon = lp.epsilons[ei];
      std::vector<Pose> lazier_poses;
      for (std::size_t r = 0; r < lp.repeats; ++r) {
        problem.seed = derive_seed(spec.base_seed, {kLazierRun, ni, ki, ei, w, r});
        const auto lazier = lazier_greedy_select(problem);
        st.evaluations_sum += static_cast<double>(lazier.gain_evaluations);
        st.time_sum += lazier.wall_time;
        const double value = normalized_log_det(problem.blocks, lazier.chosen, problem.prior_lambda);
        st.logdet_ratio_sum += (lazy_value - value) / lazy_value;
        const auto pose = solve_subset(cfg.camera, inputs.observations, lazier.chosen, init);
        if (!pose) {
          ++st.failures;
          continue;
        }
        ++st.successes;
        lazier_poses.push_back(*pose);
      }
      if (lazier_poses.empty()) continue;
      const std::vector<Pose> lazy_copies(lazier_poses.size(), *lazy_pose);
      const std::vector<Pose> truths(lazier_poses.size(), world.true_pose);
      try {
        st.error_ratio = error_ratio(lazier_poses, lazy_copies, truths);
      } catch (const DegenerateBaseline&) {
        st.error_ratio.reset();
      }
    }
    res.ok = true;
  });

  std::vector<Column> cols = {{"n"}, {"k"}, {"epsilon"}, {"sample_size"}, {"repeats"},
                              {"pixel_sigma"}};
  append(cols, world_columns());
  append(cols, {{"worlds_ok"}, {"world_failures"}, {"lazier_failures"}, {"mean_error_ratio"},
                {"max_error_ratio"}, {"mean_logdet_ratio"}, {"lazy_evaluations_mean"},
                {"lazier_evaluations_mean"}, {"greedy_evaluations"}, {"lazy_time_ms", true},
                {"lazier_time_ms", true}});
  ExperimentReport report(cols);
  for (std::size_t ni = 0; ni < n_n; ++ni) {
    for (std::size_t ki = 0; ki < n_k; ++ki) {
      for (std::size_t ei = 0; ei < n_e; ++ei) {
        const std::size_t n = lp.n_values[ni];
        const std::size_t k = lp.k_values[ki];
        std::size_t ok = 0, world_failures = 0, lazier_failures = 0, lazier_runs = 0;
        double ratio_sum = 0.0, ratio_max = 0.0, logdet_sum = 0.0, lazy_evals = 0.0;
        double lazier_evals = 0.0, lazy_time = 0.0, lazier_time = 0.0;
        for (std::size_t w = 0; w < worlds; ++w) {
          const WorldResult& res = results[(ni * n_k + ki) * worlds + w];
          const LazierStats* st = res.ok ? &res.per_epsilon[ei] : nullptr;
          if (!st || !st->error_ratio) {
            ++world_failures;
            if (st) lazier_failures += st->failures;
            continue;
          }
          ++ok;
          ratio_sum += *st->error_ratio;
          ratio_max = std::max(ratio_max, *st->error_ratio);
          logdet_sum += st->logdet_ratio_sum;
          lazier_failures += st->failures;
          lazier_runs += lp.repeats;
          lazy_evals += static_cast<double>(res.lazy_evaluations);
          lazier_evals += st->evaluations_sum;
          lazy_time += res.lazy_time;
          lazier_time += st->time_sum;
        }
        const double okd = static_cast<double>(ok);
        const double runs = static_cast<double>(lazier_runs);
        // Plain greedy evaluates every remaining candidate each round.
        const auto greedy_evals = as_int(k * n - k * (k - 1) / 2);
        std::vector<Cell> row = {as_int(n), as_int(k), lp.epsilons[ei],
                                 as_int(sample_size(n, k, lp.epsilons[ei])), as_int(lp.repeats),
                                 lp.pixel_sigma};
        auto cells = world_cells(spec);
        cells[2] = as_int(n);  // n_points column reports the candidate count
        append(row, std::move(cells));
        append(row, {as_int(ok), as_int(world_failures), as_int(lazier_failures),
                     ok ? ratio_sum / okd : kNaN, ok ? ratio_max : kNaN,
                     ok ? logdet_sum / runs : kNaN, ok ? lazy_evals / okd : kNaN,
                     ok ? lazier_evals / runs : kNaN, greedy_evals,
                     ok ? 1e3 * lazy_time / okd : kNaN, ok ? 1e3 * lazier_time / runs : kNaN});
        report.add_row(std::move(row));
      }
    }
  }
  return report;
}

// --- active matching -----------------------------------------------------------

ExperimentReport run_matching_sim(const ExperimentSpec& spec) {
  spec.validate();
  const auto& mp = spec.matching;
  struct GridPoint {
    std::size_t k;
    double epsilon;
    double miss;
    bool stereo;
  };
  std::vector<GridPoint> grid;
  for (const auto& mode : mp.modes)
    for (std::size_t k : mp.k_values)
      for (double e : mp.epsilons)
        for (double miss : mp.miss_probabilities) grid.push_back({k, e, miss, mode == "stereo"});

  struct TrialResult {
    bool world_ok = false;
    std::optional<PoseError> gf_error;
    std::optional<PoseError> all_error;
    std::size_t candidates = 0, matches = 0, gain_evaluations = 0, match_attempts = 0;
    std::size_t sample_size = 0, all_matches = 0;
    bool budget_hit = false;
    double gf_time = 0.0, all_time = 0.0;
  };
  const std::size_t n_g = grid.size();
  std::vector<TrialResult> results(n_g * spec.trials);

  kernels::parallel_for(spec.trials, execution_for(spec), spec.workers, [&](std::size_t trial) {
    ScenarioConfig cfg = spec.world;
    cfg.camera.baseline = mp.baseline;
    cfg.pixel_sigma = mp.pixel_sigma;
    cfg.seed = derive_seed(spec.base_seed, {kWorld, trial});
    Scenario world;
    try {
      world = generate_scenario(cfg);
    } catch (const Degenerate&) {
      return;
    }
    const auto points = map_points_from(world);
    FrameSimConfig fc;
    fc.pixel_sigma = mp.pixel_sigma;
    fc.max_level = mp.max_level;
    fc.clutter = mp.clutter;
    fc.seed = derive_seed(spec.base_seed, {kFrame, trial});
    const FrameMeasurements frame = simulate_frame(world, fc);

    Rng guess_rng(derive_seed(spec.base_seed, {kGuess, trial}));
    TangentVector xi;
    for (int a = 0; a < 3; ++a) xi[a] = guess_rng.uniform(-mp.guess_translation, mp.guess_translation);
    for (int a = 3; a < 6; ++a) xi[a] = guess_rng.uniform(-mp.guess_rotation, mp.guess_rotation);
    const Pose guess = retract(world.true_pose, xi);

    auto observation_for = [&](std::size_t id, const FrameMeasurement& left,
                               const std::optional<FrameMeasurement>& right) {
      MatchedObservation o;
      o.map_point = points[id].position;
      o.pixel = left.pixel;
      o.sigma_z = scale_level_cov(left.level, fc.scale_factor, mp.pixel_sigma);
      o.pyramid_level = left.level;
      o.sigma_p = points[id].sigma_p;
      if (right) {
        o.right_pixel = right->pixel;
        o.right_sigma_z = scale_level_cov(right->level, fc.scale_factor, mp.pixel_sigma);
      }
      return o;
    };
    auto solve = [&](std::vector<std::pair<std::size_t, MatchedObservation>> obs)
        -> std::optional<PoseError> {
      std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<MatchedObservation> flat;
      flat.reserve(obs.size());
      for (auto& o : obs) flat.push_back(std::move(o.second));
      try {
        return pose_error(gauss_newton(cfg.camera, flat, guess).pose, world.true_pose);
      } catch (const Error&) {
        return std::nullopt;
      }
    };

    for (std::size_t gi = 0; gi < n_g; ++gi) {
      const GridPoint& g = grid[gi];
      TrialResult& res = results[gi * spec.trials + trial];
      res.world_ok = true;
      MatcherSim sim;
      sim.window_radius = mp.window_radius;
      sim.miss_probability = g.miss;
      sim.clutter = mp.clutter;

      MatchingOptions opts;
      opts.base_sigma_px = mp.pixel_sigma;
      opts.scale_factor = fc.scale_factor;
      opts.seed = derive_seed(spec.base_seed, {kSampler, gi, trial});
      sim.seed = derive_seed(spec.base_seed, {kMatcher, gi, trial});
      SimulatedMatcher matcher(sim, frame);
      auto t0 = Clock::now();
      const MatchSet ms =
          g.stereo ? good_feature_matching_stereo(points, g.k, mp.t_max, g.epsilon, matcher,
                                                  cfg.camera, guess, opts)
                   : good_feature_matching_mono(points, g.k, mp.t_max, g.epsilon, matcher,
                                                cfg.camera, guess, opts);
      std::vector<std::pair<std::size_t, MatchedObservation>> gf_obs;
      for (const auto& t : ms.triples) {
        gf_obs.emplace_back(t.map_point_id, observation_for(t.map_point_id, t.left, t.right));
      }
      res.gf_error = solve(std::move(gf_obs));
      res.gf_time = seconds_since(t0);
      res.candidates = ms.stats.candidates;
      res.matches = ms.triples.size();
      res.gain_evaluations = ms.stats.gain_evaluations;
      res.match_attempts = ms.stats.match_attempts;
      res.sample_size = ms.stats.sample_size;
      res.budget_hit = ms.stats.budget_exhausted && ms.triples.size() < g.k;

      // Conventional pipeline: window-match every predicted point, then solve.
      sim.seed = derive_seed(spec.base_seed, {kMatchAll, gi, trial});
      SimulatedMatcher all_matcher(sim, frame);
      t0 = Clock::now();
      std::vector<std::pair<std::size_t, MatchedObservation>> all_obs;
      for (const auto& p : points) {
        if (guess.transform(p.position).z() < cfg.camera.min_depth) continue;
        if (!cfg.camera.in_image(project_world(cfg.camera, guess, p.position))) continue;
        const auto left = window_match(cfg.camera, p, guess, FrameSide::kLeft, all_matcher);
        if (!left) continue;
        std::optional<FrameMeasurement> right;
        if (g.stereo) right = window_match(cfg.camera, p, guess, FrameSide::kRight, all_matcher);
        all_obs.emplace_back(p.id, observation_for(p.id, *left, right));
      }
      res.all_matches = all_obs.size();
      res.all_error = solve(std::move(all_obs));
      res.all_time = seconds_since(t0);
    }
  });

  std::vector<Column> cols = {{"mode"}, {"k"}, {"epsilon"}, {"miss_probability"},
                              {"window_radius"}, {"t_max_ms"}, {"pixel_sigma"}, {"max_level"},
                              {"clutter"}, {"baseline_m"}, {"guess_translation"},
                              {"guess_rotation"}};
  append(cols, world_columns());
  append(cols, {{"world_failures"}, {"mean_candidates"}, {"mean_matches"}, {"mean_sample_size"},
                {"mean_gain_evaluations"}, {"mean_match_attempts"}, {"budget_hits"},
                {"gf_failures"}, {"rms_translation_gf_m"}, {"rms_rotation_gf_deg"},
                {"mean_all_matches"}, {"all_failures"}, {"rms_translation_all_m"},
                {"rms_rotation_all_deg"}, {"gf_time_ms", true}, {"all_time_ms", true}});
  ExperimentReport report(cols);
  for (std::size_t gi = 0; gi < n_g; ++gi) {
    const GridPoint& g = grid[gi];
    RmsAccumulator gf, all;
    std::size_t world_failures = 0, budget_hits = 0, ok = 0;
    double cand = 0, matches = 0, samples = 0, evals = 0, attempts = 0, all_matches = 0;
    double gf_time = 0, all_time = 0;
    for (std::size_t t = 0; t < spec.trials; ++t) {
      const TrialResult& r = results[gi * spec.trials + t];
      if (!r.world_ok) {
        ++world_failures;
        continue;
      }
      ++ok;
      gf.add(r.gf_error);
      all.add(r.all_error);
      cand += r.candidates;
      matches += r.matches;
      samples += r.sample_size;
      evals += r.gain_evaluations;
      attempts += r.match_attempts;
      all_matches += r.all_matches;
      budget_hits += r.budget_hit ? 1 : 0;
      gf_time += r.gf_time;
      all_time += r.all_time;
    }
    const double d = ok ? static_cast<double>(ok) : kNaN;
    std::vector<Cell> row = {std::string(g.stereo ? "stereo" : "mono"), as_int(g.k), g.epsilon,
                             g.miss, mp.window_radius, 1e3 * mp.t_max, mp.pixel_sigma,
                             static_cast<std::int64_t>(mp.max_level), as_int(mp.clutter),
                             mp.baseline, mp.guess_translation, mp.guess_rotation};
    append(row, world_cells(spec));
    append(row, {as_int(world_failures), cand / d, matches / d, samples / d, evals / d,
                 attempts / d, as_int(budget_hits), as_int(gf.failures), gf.rms_t(), gf.rms_r(),
                 all_matches / d, as_int(all.failures), all.rms_t(), all.rms_r(),
                 1e3 * gf_time / d, 1e3 * all_time / d});
    report.add_row(std::move(row));
  }
  return report;
}

// --- theory curve --------------------------------------------------------------

ExperimentReport run_bounds_curve(const ExperimentSpec& spec) {
  spec.validate();
  const auto& b = spec.bounds;
  const double zero = std::exp(-b.mu) - std::exp(-1.0);
  ExperimentReport report({{"k"}, {"mu"}, {"epsilon"}, {"ratio_expectation"}, {"probability"},
                           {"zero_point"}});
  for (double eps : bounds_grid(b)) {
    const auto tb = theory_bounds(b.k, b.mu, eps);
    report.add_row({as_int(b.k), b.mu, eps, tb.ratio_expectation, tb.probability,
                    static_cast<std::int64_t>(eps == zero ? 1 : 0)});
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::kPoseOptMetrics: return run_pose_opt_metrics(spec);
    case ExperimentKind::kLazierBenchmark: return run_lazier_benchmark(spec);
    case ExperimentKind::kMatchingSim: return run_matching_sim(spec);
    case ExperimentKind::kBoundsCurve: return run_bounds_curve(spec);
  }
  throw ConfigError("unknown experiment kind");
}

// --- threshold checks ------------------------------------------------------------

std::vector<std::string> check_report(const ExperimentSpec& spec, const ExperimentReport& report) {
  std::vector<std::string> violations;
  auto fail = [&](std::string msg) { violations.push_back(std::move(msg)); };
  const auto& rows = report.rows();

  switch (spec.kind) {
    case ExperimentKind::kPoseOptMetrics: {
      // MaxLogDet must not lose to Random, and must equal All once every
      // visible feature is selected.
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (report.text(i, "method") != "MaxLogDet") continue;
        const double sigma = report.number(i, "pixel_sigma");
        const double k = report.number(i, "subset_size");
        const double logdet = report.number(i, "rms_translation_m");
        for (std::size_t j = 0; j < rows.size(); ++j) {
          if (report.number(j, "pixel_sigma") != sigma) continue;
          const std::string& m = report.text(j, "method");
          const double other = report.number(j, "rms_translation_m");
          if (m == "Random" && report.number(j, "subset_size") == k && !(logdet <= other)) {
            std::ostringstream s;
            s << "sigma=" << sigma << " k=" << k << ": RMS(MaxLogDet)=" << logdet
              << " > RMS(Random)=" << other;
            fail(s.str());
          }
          if (m == "All" && k >= static_cast<double>(spec.world.n_points) &&
              report.number(j, "subset_size") == k && !(std::abs(logdet - other) <= 1e-9)) {
            std::ostringstream s;
            s << "sigma=" << sigma << " k=" << k << ": RMS(MaxLogDet)=" << logdet
              << " differs from RMS(All)=" << other;
            fail(s.str());
          }
        }
      }
      break;
    }
    case ExperimentKind::kLazierBenchmark:
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double eps = report.number(i, "epsilon");
        const double k = report.number(i, "k");
        const double s = report.number(i, "sample_size");
        const double lazier_evals = report.number(i, "lazier_evaluations_mean");
        if (!(lazier_evals <= s * k)) {
          fail("n=" + format_double(report.number(i, "n")) + " k=" + format_double(k) +
               " eps=" + format_double(eps) + ": lazier evaluations exceed s*k");
        }
        if (eps <= 0.1 && !(report.number(i, "mean_error_ratio") < 0.02)) {
          fail("n=" + format_double(report.number(i, "n")) + " k=" + format_double(k) +
               " eps=" + format_double(eps) + ": mean error ratio " +
               format_double(report.number(i, "mean_error_ratio")) + " >= 0.02");
        }
      }
      break;
    case ExperimentKind::kMatchingSim:
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (report.number(i, "miss_probability") != 0.0) continue;
        const double k = report.number(i, "k");
        const double s = report.number(i, "mean_sample_size");
        const double per_match = report.text(i, "mode") == "stereo" ? 2.0 : 1.0;
        if (!(report.number(i, "mean_match_attempts") <= s * k + per_match * k)) {
          fail("mode=" + report.text(i, "mode") + " k=" + format_double(k) +
               ": match attempts exceed s*k + k");
        }
      }
      break;
    case ExperimentKind::kBoundsCurve: {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (report.number(i, "zero_point") == 1.0 && !(report.number(i, "probability") < 1e-9)) {
          fail("probability at the zero point is " + format_double(report.number(i, "probability")));
        }
        if (i == 0) continue;
        const double de = report.number(i, "epsilon") - report.number(i - 1, "epsilon");
        const double dr = report.number(i, "ratio_expectation") - report.number(i - 1, "ratio_expectation");
        if (de > 0.0 && !(std::abs(dr / de + 1.0) < 1e-6)) {
          fail("ratio_expectation slope " + format_double(dr / de) + " != -1");
        }
      }
      break;
    }
  }
  return violations;
}

}  // namespace gfm
