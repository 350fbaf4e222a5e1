#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "hvtrack/synth.hpp"

using namespace hvt;

namespace {

constexpr double kPi = std::numbers::pi;

// classify a world point to the box face it lies on (5 sampled faces)
int face_of(const Vec3& world, const Box7& box) {
  const Vec3 p = to_local_point(world, box);
  const double hl = box.l / 2, hw = box.w / 2, hh = box.h / 2;
  const double eps = 1e-9;
  if (std::abs(p.x - hl) < eps) return 0;   // front
  if (std::abs(p.x + hl) < eps) return 1;   // back
  if (std::abs(p.y - hw) < eps) return 2;   // left
  if (std::abs(p.y + hw) < eps) return 3;   // right
  if (std::abs(p.z - hh) < eps) return 4;   // top
  return -1;
}

Vec3 face_normal_world(int face, const Box7& box) {
  static const Vec3 locals[5] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
  const Vec3& n = locals[face];
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  return {c * n.x - s * n.y, s * n.x + c * n.y, n.z};
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("static scene: identical boxes and identical point pattern") {
  SynthConfig cfg;
  cfg.n_frames = 5;
  cfg.speed_range = 0;
  cfg.yaw_rate_range = 0;
  cfg.n_distractors = 0;
  cfg.clutter_density = 0;
  cfg.seed = 3;
  const Tracklet t = generate_sequence(cfg);
  REQUIRE(t.frames.size() == 5);
  for (std::size_t f = 1; f < 5; ++f) {
    CHECK(t.frames[f].gt_box.cx == t.frames[0].gt_box.cx);
    CHECK(t.frames[f].gt_box.yaw == t.frames[0].gt_box.yaw);
    REQUIRE(t.frames[f].cloud.size() == t.frames[0].cloud.size());
    for (std::size_t i = 0; i < t.frames[0].cloud.size(); ++i) {
      CHECK(t.frames[f].cloud.points[i].x == t.frames[0].cloud.points[i].x);
      CHECK(t.frames[f].cloud.points[i].y == t.frames[0].cloud.points[i].y);
      CHECK(t.frames[f].cloud.points[i].z == t.frames[0].cloud.points[i].z);
    }
  }
}

TEST_CASE("same config and seed produce bit-identical tracklets") {
  SynthConfig cfg;
  cfg.n_frames = 8;
  cfg.speed_range = 0.8;
  cfg.yaw_rate_range = 0.2;
  cfg.n_distractors = 2;
  cfg.clutter_density = 0.01;
  cfg.seed = 77;
  const Tracklet a = generate_sequence(cfg);
  const Tracklet b = generate_sequence(cfg);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    CHECK(a.frames[f].gt_box.cx == b.frames[f].gt_box.cx);
    CHECK(a.frames[f].gt_box.yaw == b.frames[f].gt_box.yaw);
    REQUIRE(a.frames[f].cloud.size() == b.frames[f].cloud.size());
    for (std::size_t i = 0; i < a.frames[f].cloud.size(); ++i)
      CHECK(a.frames[f].cloud.points[i].x == b.frames[f].cloud.points[i].x);
  }
}

TEST_CASE("every emitted target point faces the sensor") {
  SynthConfig cfg;
  cfg.n_frames = 10;
  cfg.speed_range = 1.0;
  cfg.yaw_rate_range = 0.5;
  cfg.n_distractors = 0;
  cfg.clutter_density = 0;
  cfg.seed = 13;
  const Tracklet t = generate_sequence(cfg);
  const Vec3 sensor = t.sensor_origin;
  for (const auto& fr : t.frames) {
    REQUIRE(fr.cloud.size() >= 1);  // the box is never empty
    std::size_t on_target = 0;
    for (const auto& p : fr.cloud.points) {
      const int face = face_of(p, fr.gt_box);
      if (face < 0) continue;
      ++on_target;
      const Vec3 n = face_normal_world(face, fr.gt_box);
      const double d = n.x * (sensor.x - p.x) + n.y * (sensor.y - p.y) +
                       n.z * (sensor.z - p.z);
      CHECK(d > 0.0);
    }
    CHECK(on_target >= 1);
    // every point is inside the (boundary-inclusive) ground-truth box
    std::size_t inside = 0;
    for (const auto& p : fr.cloud.points) inside += point_in_box(p, fr.gt_box);
    CHECK(inside >= 1);
  }
}

TEST_CASE("quarter-turn flips the visible side faces to a disjoint set") {
  SynthConfig base;
  base.n_frames = 2;
  base.speed_range = 0;
  base.yaw_rate_range = 0;
  base.n_distractors = 0;
  base.clutter_density = 0;
  base.seed = 21;
  base.fix_start = true;
  base.start_x = 20;
  base.start_y = 0;
  base.start_yaw = 0;
  base.sensor_z = 0.5;  // below the roof so the top face stays hidden

  SynthConfig turned = base;
  turned.start_yaw = kPi / 2;

  auto faces_of = [](const Tracklet& t) {
    std::set<int> faces;
    for (const auto& p : t.frames[0].cloud.points) {
      const int f = face_of(p, t.frames[0].gt_box);
      REQUIRE(f >= 0);
      if (f < 4) faces.insert(f);  // side faces only
    }
    return faces;
  };
  const auto fa = faces_of(generate_sequence(base));
  const auto fb = faces_of(generate_sequence(turned));
  CHECK(!fa.empty());
  CHECK(!fb.empty());
  for (int f : fa) CHECK(fb.count(f) == 0);
  // sensor on the -x bearing sees the rear face at yaw 0 and, after a
  // quarter turn counter-clockwise, the left face
  CHECK(fa.count(1) == 1);
  CHECK(fb.count(2) == 1);
}

TEST_CASE("mean displacement grows strictly with speed_range") {
  auto mean_disp = [](double speed) {
    SynthConfig cfg;
    cfg.n_frames = 40;
    cfg.speed_range = speed;
    cfg.yaw_rate_range = 0.1;
    cfg.n_distractors = 0;
    cfg.clutter_density = 0;
    cfg.seed = 5;
    auto data = generate_dataset(cfg, 4);
    return motion_stats(data, 1, {0.5}).mean;
  };
  const double d0 = mean_disp(0.0);
  const double d1 = mean_disp(0.3);
  const double d2 = mean_disp(1.0);
  const double d3 = mean_disp(2.5);
  CHECK(d0 == 0.0);
  CHECK(d1 > d0);
  CHECK(d2 > d1);
  CHECK(d3 > d2);
}

TEST_CASE("config parsing round trip and validation") {
  SynthConfig cfg;
  cfg.n_frames = 17;
  cfg.speed_range = 0.4;
  cfg.seed = 12345;
  const SynthConfig back = synth_config_from_text(to_text(cfg));
  CHECK(back.n_frames == 17);
  CHECK(back.speed_range == 0.4);
  CHECK(back.seed == 12345);

  CHECK_THROWS(synth_config_from_text("n_frames = 1\n"));
  CHECK_THROWS(synth_config_from_text("bogus = 3\n"));
}

TEST_SUITE_END();
