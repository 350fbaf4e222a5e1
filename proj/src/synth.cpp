#include "hvtrack/synth.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hvtrack/rng.hpp"

namespace hvt {

namespace {

struct Face {
  Vec3 normal;  // outward, box frame
  Vec3 u_axis, v_axis;
  Vec3 center;  // box frame
  double u_half = 0, v_half = 0;
};

// 4 side faces + top; the bottom face never sees an above-ground sensor
std::vector<Face> box_faces(double w, double l, double h) {
  const double hl = 0.5 * l, hw = 0.5 * w, hh = 0.5 * h;
  return {
      {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {hl, 0, 0}, hw, hh},    // front
      {{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-hl, 0, 0}, hw, hh},  // back
      {{0, 1, 0}, {1, 0, 0}, {0, 0, 1}, {0, hw, 0}, hl, hh},    // left
      {{0, -1, 0}, {1, 0, 0}, {0, 0, 1}, {0, -hw, 0}, hl, hh},  // right
      {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {0, 0, hh}, hl, hw},    // top
  };
}

struct SurfacePoint {
  Vec3 local;
  int face = 0;
};

struct Body {
  double x = 0, y = 0, yaw = 0;
  double vx = 0, vy = 0, yaw_rate = 0;
  // body-fixed sampling pattern; a static body therefore shows the exact
  // same points every frame, and pose changes alone change what is visible
  std::vector<SurfacePoint> pattern;
};

Vec3 rotate_z(const Vec3& p, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

Body spawn_body(const SynthConfig& cfg, Rng& rng, bool near_center) {
  Body b;
  const double r = near_center ? 0.35 * cfg.arena_half : 0.9 * cfg.arena_half;
  b.x = rng.uniform(-r, r);
  b.y = rng.uniform(-r, r);
  b.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double speed = rng.uniform(0.4, 1.0) * cfg.speed_range;
  const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
  b.vx = speed * std::cos(heading);
  b.vy = speed * std::sin(heading);
  b.yaw_rate = rng.uniform(-1.0, 1.0) * cfg.yaw_rate_range;

  const auto faces = box_faces(cfg.target_w, cfg.target_l, cfg.target_h);
  for (int fi = 0; fi < int(faces.size()); ++fi) {
    const Face& f = faces[std::size_t(fi)];
    const double area = 4.0 * f.u_half * f.v_half;
    const std::size_t count = std::size_t(std::llround(area * cfg.surface_point_density));
    for (std::size_t i = 0; i < count; ++i) {
      const double u = rng.uniform(-f.u_half, f.u_half);
      const double v = rng.uniform(-f.v_half, f.v_half);
      b.pattern.push_back({{f.center.x + u * f.u_axis.x + v * f.v_axis.x,
                            f.center.y + u * f.u_axis.y + v * f.v_axis.y,
                            f.center.z + u * f.u_axis.z + v * f.v_axis.z},
                           fi});
    }
  }
  return b;
}

void advance_body(Body& b, const SynthConfig& cfg, Rng& rng) {
  const double jitter = 0.1 * cfg.speed_range;
  b.x += b.vx + (jitter > 0 ? rng.normal(0, jitter) : 0.0);
  b.y += b.vy + (jitter > 0 ? rng.normal(0, jitter) : 0.0);
  b.yaw = wrap_angle(b.yaw + b.yaw_rate);
  // reflective arena bounds
  if (b.x > cfg.arena_half) { b.x = 2 * cfg.arena_half - b.x; b.vx = -b.vx; }
  if (b.x < -cfg.arena_half) { b.x = -2 * cfg.arena_half - b.x; b.vx = -b.vx; }
  if (b.y > cfg.arena_half) { b.y = 2 * cfg.arena_half - b.y; b.vy = -b.vy; }
  if (b.y < -cfg.arena_half) { b.y = -2 * cfg.arena_half - b.y; b.vy = -b.vy; }
}

Box7 body_box(const Body& b, const SynthConfig& cfg) {
  return Box7(b.x, b.y, 0.5 * cfg.target_h, cfg.target_w, cfg.target_l, cfg.target_h, b.yaw);
}

// Emit the body points whose face looks toward the sensor:
// dot(world normal, sensor - point) > 0. Falls back to the best-facing face
// center so the box never comes up empty.
void emit_visible_points(const Body& b, const SynthConfig& cfg, const Vec3& sensor,
                         PointCloud& out) {
  const Box7 box = body_box(b, cfg);
  const auto faces = box_faces(cfg.target_w, cfg.target_l, cfg.target_h);
  std::vector<Vec3> world_normals(faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i)
    world_normals[i] = rotate_z(faces[i].normal, box.yaw);

  const std::size_t before = out.size();
  for (const auto& sp : b.pattern) {
    const Vec3 world = to_world_point(sp.local, box);
    const Vec3& n = world_normals[std::size_t(sp.face)];
    const double d = n.x * (sensor.x - world.x) + n.y * (sensor.y - world.y) +
                     n.z * (sensor.z - world.z);
    if (d > 0.0) out.points.push_back(world);
  }
  if (out.size() == before) {
    double best = -1e30;
    Vec3 best_point{};
    for (std::size_t i = 0; i < faces.size(); ++i) {
      const Vec3 c = to_world_point(faces[i].center, box);
      const Vec3& n = world_normals[i];
      const double d = n.x * (sensor.x - c.x) + n.y * (sensor.y - c.y) +
                       n.z * (sensor.z - c.z);
      if (d > best) {
        best = d;
        best_point = c;
      }
    }
    out.points.push_back(best_point);
  }
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.n_frames < 2) throw std::invalid_argument("synth: n_frames must be >= 2");
  if (cfg.surface_point_density <= 0 || cfg.clutter_density < 0)
    throw std::invalid_argument("synth: densities must be positive");
  if (cfg.target_w <= 0 || cfg.target_l <= 0 || cfg.target_h <= 0)
    throw std::invalid_argument("synth: target size must be positive");
  if (cfg.speed_range < 0 || cfg.yaw_rate_range < 0)
    throw std::invalid_argument("synth: rates must be non-negative");
  if (cfg.n_distractors < 0) throw std::invalid_argument("synth: n_distractors must be >= 0");
}

SynthConfig synth_config_from_text(const std::string& text) {
  SynthConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key, eq, val;
    if (!(ls >> key)) continue;
    if (!(ls >> eq >> val) || eq != "=")
      throw std::invalid_argument("synth config: expected 'key = value', got '" + line + "'");
    if (key == "n_frames") cfg.n_frames = std::stoi(val);
    else if (key == "target_w") cfg.target_w = std::stod(val);
    else if (key == "target_l") cfg.target_l = std::stod(val);
    else if (key == "target_h") cfg.target_h = std::stod(val);
    else if (key == "speed_range") cfg.speed_range = std::stod(val);
    else if (key == "yaw_rate_range") cfg.yaw_rate_range = std::stod(val);
    else if (key == "n_distractors") cfg.n_distractors = std::stoi(val);
    else if (key == "clutter_density") cfg.clutter_density = std::stod(val);
    else if (key == "surface_point_density") cfg.surface_point_density = std::stod(val);
    else if (key == "arena_half") cfg.arena_half = std::stod(val);
    else if (key == "sensor_x") cfg.sensor_x = std::stod(val);
    else if (key == "sensor_y") cfg.sensor_y = std::stod(val);
    else if (key == "sensor_z") cfg.sensor_z = std::stod(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else throw std::invalid_argument("synth config: unknown key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

std::string to_text(const SynthConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "n_frames = " << cfg.n_frames << '\n'
      << "target_w = " << cfg.target_w << '\n'
      << "target_l = " << cfg.target_l << '\n'
      << "target_h = " << cfg.target_h << '\n'
      << "speed_range = " << cfg.speed_range << '\n'
      << "yaw_rate_range = " << cfg.yaw_rate_range << '\n'
      << "n_distractors = " << cfg.n_distractors << '\n'
      << "clutter_density = " << cfg.clutter_density << '\n'
      << "surface_point_density = " << cfg.surface_point_density << '\n'
      << "arena_half = " << cfg.arena_half << '\n'
      << "sensor_x = " << cfg.sensor_x << '\n'
      << "sensor_y = " << cfg.sensor_y << '\n'
      << "sensor_z = " << cfg.sensor_z << '\n'
      << "seed = " << cfg.seed << '\n';
  return out.str();
}

Tracklet generate_sequence(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const Vec3 sensor{cfg.sensor_x, cfg.sensor_y, cfg.sensor_z};

  Body target = spawn_body(cfg, rng, /*near_center=*/true);
  if (cfg.fix_start) {
    target.x = cfg.start_x;
    target.y = cfg.start_y;
    target.yaw = wrap_angle(cfg.start_yaw);
  }
  std::vector<Body> distractors;
  for (int i = 0; i < cfg.n_distractors; ++i)
    distractors.push_back(spawn_body(cfg, rng, /*near_center=*/false));

  Tracklet t;
  t.id = "synth:" + std::to_string(cfg.seed);
  t.category = Category::Synthetic;
  t.sensor_origin = sensor;

  const double arena_area = (2 * cfg.arena_half) * (2 * cfg.arena_half);
  const std::size_t clutter_count = std::size_t(std::llround(arena_area * cfg.clutter_density));

  for (int frame = 0; frame < cfg.n_frames; ++frame) {
    if (frame > 0) {
      advance_body(target, cfg, rng);
      for (auto& d : distractors) advance_body(d, cfg, rng);
    }
    TrackletFrame f;
    f.frame_id = frame;
    f.gt_box = body_box(target, cfg);
    emit_visible_points(target, cfg, sensor, f.cloud);
    for (const auto& d : distractors) emit_visible_points(d, cfg, sensor, f.cloud);
    for (std::size_t i = 0; i < clutter_count; ++i)
      f.cloud.points.push_back({rng.uniform(-cfg.arena_half, cfg.arena_half),
                                rng.uniform(-cfg.arena_half, cfg.arena_half),
                                rng.uniform(0.0, 0.15)});
    t.frames.push_back(std::move(f));
  }
  return t;
}

std::vector<Tracklet> generate_dataset(const SynthConfig& cfg, int n_tracklets) {
  std::vector<Tracklet> out;
  for (int i = 0; i < n_tracklets; ++i) {
    SynthConfig c = cfg;
    c.seed = mix_seed(cfg.seed, std::uint64_t(i));
    Tracklet t = generate_sequence(c);
    t.id = "synth:" + std::to_string(cfg.seed) + ":" + std::to_string(i);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace hvt
