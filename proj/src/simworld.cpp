#include "gfm/simworld.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "gfm/error.hpp"
#include "gfm/random.hpp"

namespace gfm {

namespace {

constexpr const char* kMagic = "gfm-scenario";
constexpr int kFormatVersion = 1;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void draw_pixel_noise(Scenario& s, double pixel_sigma, Rng& rng) {
  s.measurements.clear();
  for (std::size_t i = 0; i < s.points_true.size(); ++i) {
    if (!s.visible[i]) continue;
    Vec2 px = project_world(s.config.camera, s.true_pose, s.points_true[i]);
    px.x() += rng.gaussian(pixel_sigma);
    px.y() += rng.gaussian(pixel_sigma);
    s.measurements.push_back({i, px});
  }
}

std::istringstream next_record(std::istream& in, const char* expected) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream rec(line);
    std::string tag;
    rec >> tag;
    if (tag != expected) throw ConfigError(std::string("expected '") + expected + "' record, got '" + tag + "'");
    return rec;
  }
  throw ConfigError(std::string("unexpected end of input, expected '") + expected + "'");
}

template <typename... T>
void read_fields(std::istringstream& rec, const char* what, T&... fields) {
  if (!(rec >> ... >> fields)) throw ConfigError(std::string("malformed '") + what + "' record");
}

}  // namespace

void ScenarioConfig::validate() const {
  camera.validate();
  if (n_points == 0) throw InvalidArgument("n_points must be positive");
  if (!(depth_min > 0.0) || !(depth_max > depth_min)) {
    throw InvalidArgument("depth range must be positive and ordered");
  }
  if (!(motion_translation >= 0.0) || !(motion_rotation >= 0.0)) {
    throw InvalidArgument("motion scale must be non-negative");
  }
  if (!(map_sigma >= 0.0) || !(pixel_sigma >= 0.0)) throw InvalidArgument("sigmas must be non-negative");
}

Scenario generate_scenario(const ScenarioConfig& config) {
  config.validate();
  const CameraModel& cam = config.camera;
  Rng rng(config.seed);

  Scenario s;
  s.config = config;
  s.points_true.reserve(config.n_points);
  for (std::size_t i = 0; i < config.n_points; ++i) {
    const double u = rng.uniform(0.0, cam.width);
    const double v = rng.uniform(0.0, cam.height);
    const double z = rng.uniform(config.depth_min, config.depth_max);
    s.points_true.emplace_back((u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z);
  }

  TangentVector xi;
  for (int a = 0; a < 3; ++a) xi[a] = rng.uniform(-config.motion_translation, config.motion_translation);
  for (int a = 3; a < 6; ++a) xi[a] = rng.uniform(-config.motion_rotation, config.motion_rotation);
  s.true_pose = se3_exp(xi);

  s.points_map.reserve(config.n_points);
  for (const auto& p : s.points_true) {
    Vec3 noisy = p;
    for (int a = 0; a < 3; ++a) noisy[a] += rng.gaussian(config.map_sigma);
    s.points_map.push_back(noisy);
  }

  s.visible.assign(config.n_points, false);
  for (std::size_t i = 0; i < config.n_points; ++i) {
    const Vec3 pc = s.true_pose.transform(s.points_true[i]);
    if (pc.z() < cam.min_depth) continue;
    s.visible[i] = cam.in_image(project_world(cam, s.true_pose, s.points_true[i]));
  }
  draw_pixel_noise(s, config.pixel_sigma, rng);

  if (s.visible_count() < kMinVisiblePoints) {
    throw Degenerate("only " + std::to_string(s.visible_count()) +
                     " points visible after the motion");
  }
  return s;
}

Scenario redraw_measurement_noise(const Scenario& scenario, double pixel_sigma,
                                  std::uint64_t seed) {
  if (!(pixel_sigma >= 0.0)) throw InvalidArgument("pixel_sigma must be non-negative");
  Scenario s = scenario;
  s.config.pixel_sigma = pixel_sigma;
  Rng rng(seed);
  draw_pixel_noise(s, pixel_sigma, rng);
  return s;
}

void write_scenario(std::ostream& out, const Scenario& s) {
  const auto& c = s.config;
  const auto& cam = c.camera;
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "config " << c.n_points << ' ' << fmt17(c.depth_min) << ' ' << fmt17(c.depth_max) << ' '
      << fmt17(c.motion_translation) << ' ' << fmt17(c.motion_rotation) << ' '
      << fmt17(c.map_sigma) << ' ' << fmt17(c.pixel_sigma) << ' ' << c.seed << '\n';
  out << "camera " << fmt17(cam.fx) << ' ' << fmt17(cam.fy) << ' ' << fmt17(cam.cx) << ' '
      << fmt17(cam.cy) << ' ' << cam.width << ' ' << cam.height << ' ' << fmt17(cam.baseline)
      << ' ' << fmt17(cam.min_depth) << '\n';
  out << "pose";
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) out << ' ' << fmt17(s.true_pose.rotation()(r, col));
  for (int a = 0; a < 3; ++a) out << ' ' << fmt17(s.true_pose.translation()[a]);
  out << '\n';
  for (std::size_t i = 0; i < s.points_true.size(); ++i) {
    out << "point " << i;
    for (int a = 0; a < 3; ++a) out << ' ' << fmt17(s.points_true[i][a]);
    for (int a = 0; a < 3; ++a) out << ' ' << fmt17(s.points_map[i][a]);
    out << ' ' << (s.visible[i] ? 1 : 0) << '\n';
  }
  for (const auto& m : s.measurements) {
    out << "measurement " << m.point << ' ' << fmt17(m.pixel.x()) << ' ' << fmt17(m.pixel.y())
        << '\n';
  }
  out << "end\n";
}

Scenario read_scenario(std::istream& in) {
  Scenario s;
  {
    auto rec = next_record(in, kMagic);
    int version = 0;
    read_fields(rec, kMagic, version);
    if (version != kFormatVersion) throw ConfigError("unsupported scenario format version");
  }
  auto& c = s.config;
  {
    auto rec = next_record(in, "config");
    read_fields(rec, "config", c.n_points, c.depth_min, c.depth_max, c.motion_translation,
                c.motion_rotation, c.map_sigma, c.pixel_sigma, c.seed);
  }
  {
    auto& cam = c.camera;
    auto rec = next_record(in, "camera");
    read_fields(rec, "camera", cam.fx, cam.fy, cam.cx, cam.cy, cam.width, cam.height,
                cam.baseline, cam.min_depth);
  }
  {
    auto rec = next_record(in, "pose");
    Mat3 r;
    Vec3 t;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) read_fields(rec, "pose", r(i, j));
    for (int a = 0; a < 3; ++a) read_fields(rec, "pose", t[a]);
    try {
      s.true_pose = Pose(r, t);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  s.points_true.resize(c.n_points);
  s.points_map.resize(c.n_points);
  s.visible.assign(c.n_points, false);
  for (std::size_t i = 0; i < c.n_points; ++i) {
    auto rec = next_record(in, "point");
    std::size_t index = 0;
    int vis = 0;
    read_fields(rec, "point", index);
    if (index != i) throw ConfigError("point records out of order");
    for (int a = 0; a < 3; ++a) read_fields(rec, "point", s.points_true[i][a]);
    for (int a = 0; a < 3; ++a) read_fields(rec, "point", s.points_map[i][a]);
    read_fields(rec, "point", vis);
    s.visible[i] = vis != 0;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream rec(line);
    std::string tag;
    rec >> tag;
    if (tag == "end") return s;
    if (tag != "measurement") throw ConfigError("unexpected record '" + tag + "'");
    ScenarioMeasurement m;
    read_fields(rec, "measurement", m.point, m.pixel.x(), m.pixel.y());
    if (m.point >= c.n_points || !s.visible[m.point]) {
      throw ConfigError("measurement refers to an invisible or unknown point");
    }
    s.measurements.push_back(m);
  }
  throw ConfigError("missing 'end' record");
}

std::string compare_scenarios(const Scenario& a, const Scenario& b) {
  std::ostringstream diff;
  const auto& ca = a.config;
  const auto& cb = b.config;
  if (ca.n_points != cb.n_points || ca.depth_min != cb.depth_min || ca.depth_max != cb.depth_max ||
      ca.motion_translation != cb.motion_translation || ca.motion_rotation != cb.motion_rotation ||
      ca.map_sigma != cb.map_sigma || ca.pixel_sigma != cb.pixel_sigma || ca.seed != cb.seed) {
    return "config differs";
  }
  const auto& ka = ca.camera;
  const auto& kb = cb.camera;
  if (ka.fx != kb.fx || ka.fy != kb.fy || ka.cx != kb.cx || ka.cy != kb.cy ||
      ka.width != kb.width || ka.height != kb.height || ka.baseline != kb.baseline ||
      ka.min_depth != kb.min_depth) {
    return "camera differs";
  }
  if (a.true_pose.rotation() != b.true_pose.rotation() ||
      a.true_pose.translation() != b.true_pose.translation()) {
    return "true pose differs";
  }
  for (std::size_t i = 0; i < a.points_true.size(); ++i) {
    if (a.points_true[i] != b.points_true[i] || a.points_map[i] != b.points_map[i] ||
        a.visible[i] != b.visible[i]) {
      diff << "point " << i << " differs";
      return diff.str();
    }
  }
  if (a.measurements.size() != b.measurements.size()) return "measurement count differs";
  for (std::size_t i = 0; i < a.measurements.size(); ++i) {
    if (a.measurements[i].point != b.measurements[i].point ||
        a.measurements[i].pixel != b.measurements[i].pixel) {
      diff << "measurement " << i << " differs";
      return diff.str();
    }
  }
  return {};
}

}  // namespace gfm
