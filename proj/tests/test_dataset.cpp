#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "hvtrack/dataset.hpp"
#include "hvtrack/rng.hpp"
#include "hvtrack/synth.hpp"

using namespace hvt;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct TempDir {
  fs::path path;
  TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("hvt_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bin(const fs::path& p, const std::vector<Vec3>& pts) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  for (const auto& v : pts) {
    const float rec[4] = {float(v.x), float(v.y), float(v.z), 0.5f};
    out.write(reinterpret_cast<const char*>(rec), sizeof rec);
  }
}

// canonical velo->cam axis mapping plus a small translation
// x_cam = -y_v + tx ; y_cam = -z_v + ty ; z_cam = x_v + tz
constexpr double kTx = 0.06, kTy = -0.04, kTz = -0.27;

void write_calib(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  out << "P2: 1 0 0 0 0 1 0 0 0 0 1 0\n";
  out << "R0_rect: 1 0 0 0 1 0 0 0 1\n";
  out << "Tr_velo_cam: 0 -1 0 " << kTx << " 0 0 -1 " << kTy << " 1 0 0 " << kTz << "\n";
}

// expected lidar-frame center for a camera-frame 3d center, inverted by hand
Vec3 cam_center_to_velo(const Vec3& c) {
  return {c.z - kTz, -(c.x - kTx), -(c.y - kTy)};
}

// builds a 3-frame toy sequence 0000 with one Car track (id 1), one
// Pedestrian track (id 2) and a DontCare row
void write_kitti_fixture(const fs::path& root) {
  write_calib(root / "calib" / "0000.txt");
  std::ofstream lab(root / "label_02" / "0000.txt");
  const double h = 1.6, w = 1.8, l = 4.2;
  for (int f = 0; f < 3; ++f) {
    // velo-frame target: center (10 + f, 2, 0.5), yaw 0.3
    const double yaw = 0.3;
    const double ry = -yaw - kPi / 2;
    // camera location is the bottom-face center
    const double xv = 10.0 + f, yv = 2.0, zv = 0.5;
    const double xc = -yv + kTx, yc = -zv + kTy + h / 2, zc = xv + kTz;
    lab << f << " 1 Car 0 0 0 0 0 10 10 " << h << ' ' << w << ' ' << l << ' ' << xc << ' '
        << yc << ' ' << zc << ' ' << ry << "\n";
    lab << f << " 2 Pedestrian 0 0 0 0 0 10 10 1.7 0.6 0.7 " << xc + 2 << ' ' << yc << ' '
        << zc << ' ' << ry << "\n";
    lab << f << " -1 DontCare 0 0 0 0 0 10 10 0 0 0 0 0 0 0\n";
  }
  lab.close();
  for (int f = 0; f < 3; ++f) {
    char name[16];
    std::snprintf(name, sizeof name, "%06d.bin", f);
    write_bin(root / "velodyne" / "0000" / name,
              {{10.0 + f, 2.0, 0.5}, {0.0, 0.0, 0.0}, {30.0, -5.0, 1.0}});
  }
}

Tracklet straight_line_tracklet(int n_frames, double step_per_frame) {
  Tracklet t;
  t.id = "toy";
  t.category = Category::Car;
  for (int f = 0; f < n_frames; ++f) {
    TrackletFrame fr;
    fr.frame_id = f;
    fr.gt_box = Box7(step_per_frame * f, 0, 0, 1.8, 4.2, 1.6, 0);
    fr.cloud.points = {{step_per_frame * f, 0, 0}};
    t.frames.push_back(fr);
  }
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("kitti loading: split filter, calibration transform, category filter") {
  TempDir dir("kitti");
  write_kitti_fixture(dir.path);

  auto cars = load_kitti_tracklets(dir.path.string(), Category::Car, Split::train);
  REQUIRE(cars.size() == 1);
  REQUIRE(cars[0].frames.size() == 3);
  CHECK(cars[0].category == Category::Car);

  // hand-applied calibration: camera bottom-center back to the velo frame
  for (int f = 0; f < 3; ++f) {
    const Box7& b = cars[0].frames[f].gt_box;
    const Vec3 expect = cam_center_to_velo(
        {-2.0 + kTx, -0.5 + kTy + 0.8, 10.0 + f + kTz});  // reconstructs (10+f, 2, 0.5)
    CHECK(b.cx == doctest::Approx(expect.x).epsilon(1e-9));
    CHECK(b.cy == doctest::Approx(expect.y).epsilon(1e-9));
    CHECK(b.cz == doctest::Approx(expect.z).epsilon(1e-9));
    CHECK(b.cx == doctest::Approx(10.0 + f));
    CHECK(b.cy == doctest::Approx(2.0));
    CHECK(b.cz == doctest::Approx(0.5));
    CHECK(b.yaw == doctest::Approx(0.3));
    CHECK(b.w == doctest::Approx(1.8));
    CHECK(b.l == doctest::Approx(4.2));
    CHECK(b.h == doctest::Approx(1.6));
    CHECK(cars[0].frames[f].cloud.size() == 3);
  }

  auto peds = load_kitti_tracklets(dir.path.string(), Category::Pedestrian, Split::train);
  REQUIRE(peds.size() == 1);

  // sequence 0000 is not in the test split
  CHECK(load_kitti_tracklets(dir.path.string(), Category::Car, Split::test).empty());
}

TEST_CASE("kitti loading: empty labels and missing files") {
  TempDir dir("kitti_err");
  write_calib(dir.path / "calib" / "0000.txt");
  std::ofstream(dir.path / "label_02" / "0000.txt").close();
  CHECK(load_kitti_tracklets(dir.path.string(), Category::Car, Split::train).empty());

  // a label row without its lidar frame must name the missing path
  {
    std::ofstream lab(dir.path / "label_02" / "0000.txt");
    lab << "0 1 Car 0 0 0 0 0 10 10 1.6 1.8 4.2 0 0 10 0\n";
  }
  try {
    load_kitti_tracklets(dir.path.string(), Category::Car, Split::train);
    FAIL("expected ingestion error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("000000.bin") != std::string::npos);
  }

  CHECK_THROWS(category_from_string("Truck"));
}

TEST_CASE("build_hv: strides, identity, conservation") {
  std::vector<Tracklet> in{straight_line_tracklet(7, 1.0)};
  auto hv = build_hv(in, 3);
  REQUIRE(hv.size() == 3);
  auto ids = [](const Tracklet& t) {
    std::vector<int> v;
    for (const auto& f : t.frames) v.push_back(f.frame_id);
    return v;
  };
  CHECK(ids(hv[0]) == std::vector<int>{0, 3, 6});
  CHECK(ids(hv[1]) == std::vector<int>{1, 4});
  CHECK(ids(hv[2]) == std::vector<int>{2, 5});

  auto same = build_hv(in, 1);
  REQUIRE(same.size() == 1);
  CHECK(ids(same[0]) == std::vector<int>{0, 1, 2, 3, 4, 5, 6});

  auto shorty = build_hv({straight_line_tracklet(2, 1.0)}, 10);
  REQUIRE(shorty.size() == 2);
  CHECK(ids(shorty[0]) == std::vector<int>{0});
  CHECK(ids(shorty[1]) == std::vector<int>{1});

  CHECK_THROWS(build_hv(in, 0));

  // conservation + gap property over random lengths and intervals
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int len = 1 + int(rng.index(40));
    const int interval = 1 + int(rng.index(12));
    std::vector<Tracklet> src{straight_line_tracklet(len, 0.5)};
    auto out = build_hv(src, interval);
    std::size_t total = 0;
    for (const auto& t : out) {
      total += t.frames.size();
      for (std::size_t i = 1; i < t.frames.size(); ++i)
        CHECK(t.frames[i].frame_id - t.frames[i - 1].frame_id == interval);
    }
    CHECK(total == std::size_t(len));
  }
}

TEST_CASE("enlargement offsets: full table and interpolation") {
  const struct {
    Category cat;
    double v1, v2, v3, v5, v10;
  } rows[] = {
      {Category::Car, 2, 2, 3, 4, 7},
      {Category::Pedestrian, 2, 2, 2, 2, 3},
      {Category::Van, 2, 3, 3, 5, 8},
      {Category::Cyclist, 2, 2, 2, 3, 4},
  };
  for (const auto& r : rows) {
    CHECK(enlargement_offset(r.cat, 1) == r.v1);
    CHECK(enlargement_offset(r.cat, 2) == r.v2);
    CHECK(enlargement_offset(r.cat, 3) == r.v3);
    CHECK(enlargement_offset(r.cat, 5) == r.v5);
    CHECK(enlargement_offset(r.cat, 10) == r.v10);
  }
  // linear interpolation between bracketing rows
  CHECK(enlargement_offset(Category::Car, 4) == doctest::Approx(3.5));
  CHECK(enlargement_offset(Category::Van, 7) == doctest::Approx(5.0 + 2.0 * 3.0 / 5.0));
  // clamped beyond the table
  CHECK(enlargement_offset(Category::Car, 15) == 7);
  CHECK_THROWS(enlargement_offset(Category::Synthetic, 5));
  CHECK_THROWS(enlargement_offset(Category::Car, 0));
}

TEST_CASE("crop_search_area: extents, canonical frame, rigid invariance") {
  const Box7 ref(0, 0, 0, 1, 1, 1, 0);
  PointCloud pc;
  pc.points = {{1.4, 0, 0}, {1.6, 0, 0}, {0, 0, 0}, {100, 100, 100}};
  const PointCloud got = crop_search_area(pc, ref, 2.0, 2.0);
  REQUIRE(got.size() == 2);  // 1.4 kept (half extent 1.5), 1.6 dropped
  CHECK(got.points[0].x == doctest::Approx(1.4));
  CHECK(got.points[1].x == doctest::Approx(0.0));

  PointCloud far;
  far.points = {{50, 50, 50}};
  CHECK(crop_search_area(far, ref, 2.0, 2.0).empty());

  // the same rigid transform applied to scene and reference leaves the
  // canonical-frame crop unchanged
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud cloud;
    for (int i = 0; i < 200; ++i)
      cloud.points.push_back(
          {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-2, 2)});
    const Box7 box(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), 1.5, 3.0,
                   1.4, rng.uniform(-kPi, kPi));
    const Box7 motion(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1), 1, 1, 1,
                      rng.uniform(-kPi, kPi));
    const PointCloud a = crop_search_area(cloud, box, 2.0, 1.0);
    const PointCloud b =
        crop_search_area(to_world_frame(cloud, motion), box_to_world(box, motion), 2.0, 1.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.points[i].x == doctest::Approx(b.points[i].x).epsilon(1e-9));
      CHECK(a.points[i].y == doctest::Approx(b.points[i].y).epsilon(1e-9));
      CHECK(a.points[i].z == doctest::Approx(b.points[i].z).epsilon(1e-9));
    }
  }
}

TEST_CASE("sample_points: counts, replacement, determinism, empty signal") {
  Rng rng(33);
  PointCloud big;
  for (int i = 0; i < 2000; ++i)
    big.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});

  auto s = sample_points(big, 1024, 7);
  REQUIRE(s.has_value());
  CHECK(s->size() == 1024);
  // distinct points when drawing without replacement
  auto key = [](const Vec3& p) { return std::to_string(p.x) + "," + std::to_string(p.y); };
  std::vector<std::string> keys;
  for (const auto& p : s->points) keys.push_back(key(p));
  std::sort(keys.begin(), keys.end());
  CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());

  PointCloud ten;
  for (int i = 0; i < 10; ++i) ten.points.push_back({double(i), 0, 0});
  auto t = sample_points(ten, 1024, 7);
  REQUIRE(t.has_value());
  CHECK(t->size() == 1024);
  for (const auto& p : t->points) CHECK((p.x >= 0 && p.x <= 9));

  auto a = sample_points(big, 256, 42);
  auto b = sample_points(big, 256, 42);
  REQUIRE((a.has_value() && b.has_value()));
  for (std::size_t i = 0; i < 256; ++i) {
    CHECK(a->points[i].x == b->points[i].x);
    CHECK(a->points[i].y == b->points[i].y);
  }

  CHECK_FALSE(sample_points(PointCloud{}, 10, 1).has_value());
  CHECK_THROWS(sample_points(big, 0, 1));
}

TEST_CASE("foreground_mask matches an independent corner-frame oracle") {
  const Box7 box(0.3, -0.2, 0.1, 1.0, 2.0, 1.2, kPi / 5);

  // oracle: axes reconstructed from the returned corners, half-space tests
  const auto cs = box_corners(box);
  const Vec3 origin = cs[2];  // (-l/2, -w/2, -h/2) corner
  auto axis = [&](int i) {
    return Vec3{cs[i].x - origin.x, cs[i].y - origin.y, cs[i].z - origin.z};
  };
  const Vec3 ax = axis(3);  // along l
  const Vec3 ay = axis(1);  // along w
  const Vec3 az = axis(6);  // along h
  auto inside_oracle = [&](const Vec3& p) {
    const Vec3 d{p.x - origin.x, p.y - origin.y, p.z - origin.z};
    auto proj = [&](const Vec3& a) {
      const double len2 = a.x * a.x + a.y * a.y + a.z * a.z;
      return (d.x * a.x + d.y * a.y + d.z * a.z) / len2;
    };
    const double u = proj(ax), v = proj(ay), w = proj(az);
    return u >= 0 && u <= 1 && v >= 0 && v <= 1 && w >= 0 && w <= 1;
  };

  Rng rng(34);
  PointCloud pts;
  for (int i = 0; i < 1000; ++i)
    pts.points.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1.5, 1.5)});
  const auto mask = foreground_mask(pts, box);
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK(mask[i] == (inside_oracle(pts.points[i]) ? 1 : 0));

  // spec examples
  PointCloud probe;
  probe.points = {{0.3, -0.2, 0.1}, {10, 10, 10}, {0.6, 0.0, 0.0}};
  const Box7 unit_rot(0, 0, 0, 1, 1, 1, kPi / 4);
  const auto m2 = foreground_mask(probe, unit_rot);
  CHECK(m2[1] == 0);
  CHECK(m2[2] == 1);  // rotated half extent along that bearing ~= 0.707
  CHECK(foreground_mask(PointCloud{{{0.3, -0.2, 0.1}}}, box)[0] == 1);
}

TEST_CASE("motion_stats: static, constant velocity, hand quantiles") {
  std::vector<Tracklet> stat{straight_line_tracklet(10, 0.0)};
  auto s = motion_stats(stat, 2, {0.25, 0.5, 0.75});
  for (const auto& [q, v] : s.quantiles) CHECK(v == 0.0);
  CHECK(s.mean == 0.0);

  std::vector<Tracklet> moving{straight_line_tracklet(20, 1.0)};
  auto m = motion_stats(moving, 5, {0.0, 0.5, 1.0});
  for (const auto& [q, v] : m.quantiles) CHECK(v == doctest::Approx(5.0));
  CHECK(m.mean == doctest::Approx(5.0));

  // displacements {1,2,3,4}: median 2.5, q75 3.25 under linear interpolation
  Tracklet zig;
  zig.id = "zig";
  zig.category = Category::Car;
  double x = 0;
  const double steps[] = {1, 2, 3, 4};
  zig.frames.push_back({PointCloud{}, Box7(0, 0, 0, 1, 1, 1, 0), 0, ""});
  for (int i = 0; i < 4; ++i) {
    x += steps[i];
    zig.frames.push_back({PointCloud{}, Box7(x, 0, 0, 1, 1, 1, 0), i + 1, ""});
  }
  auto z = motion_stats({zig}, 1, {0.5, 0.75});
  CHECK(z.quantiles[0].second == doctest::Approx(2.5));
  CHECK(z.quantiles[1].second == doctest::Approx(3.25));
  CHECK(z.mean == doctest::Approx(2.5));

  CHECK_THROWS(motion_stats({straight_line_tracklet(1, 1.0)}, 1, {0.5}));
}

TEST_CASE("tracklet index cache round trip") {
  TempDir dir("cache");
  SynthConfig cfg;
  cfg.n_frames = 4;
  cfg.seed = 99;
  cfg.n_distractors = 1;
  cfg.clutter_density = 0.005;
  auto data = generate_dataset(cfg, 2);

  const std::string index = (dir.path / "idx.txt").string();
  const std::size_t written = write_tracklet_index(data, index);
  std::size_t expect = 0;
  for (const auto& t : data) expect += t.frames.size();
  CHECK(written == expect);

  auto back = read_tracklet_index(index);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].id == data[i].id);
    CHECK(back[i].category == data[i].category);
    CHECK(back[i].sensor_origin.z == data[i].sensor_origin.z);
    REQUIRE(back[i].frames.size() == data[i].frames.size());
    for (std::size_t f = 0; f < data[i].frames.size(); ++f) {
      // boxes round-trip at full precision, clouds at lidar float32
      CHECK(back[i].frames[f].gt_box.cx == data[i].frames[f].gt_box.cx);
      CHECK(back[i].frames[f].gt_box.yaw == data[i].frames[f].gt_box.yaw);
      REQUIRE(back[i].frames[f].cloud.size() == data[i].frames[f].cloud.size());
      CHECK(back[i].frames[f].cloud.points[0].x ==
            doctest::Approx(data[i].frames[f].cloud.points[0].x).epsilon(1e-6));
    }
  }

  CHECK_THROWS(read_tracklet_index((dir.path / "missing.txt").string()));
}

TEST_CASE("make_search_sample: labels, frame, alpha and empty signal") {
  SynthConfig cfg;
  cfg.n_frames = 2;
  cfg.seed = 5;
  cfg.n_distractors = 0;
  cfg.clutter_density = 0.01;
  const Tracklet t = generate_sequence(cfg);
  const TrackletFrame& fr = t.frames[0];

  auto s = make_search_sample(fr.cloud, fr.gt_box, 2.0, 2.0, 128, 11, fr.gt_box,
                              t.sensor_origin);
  REQUIRE(s.has_value());
  CHECK(s->points.rows == 128);
  // last-reference-box frame: the ground truth is centered at the origin
  CHECK(s->gt_box_local.cx == doctest::Approx(0.0));
  CHECK(s->gt_box_local.yaw == doctest::Approx(0.0));
  // labels match a direct point-in-box pass over the sampled points
  for (std::size_t i = 0; i < 128; ++i) {
    const Vec3 p{s->points.at(i, 0), s->points.at(i, 1), s->points.at(i, 2)};
    CHECK(s->fg_mask[i] == (point_in_box(p, s->gt_box_local) ? 1 : 0));
  }
  const auto alpha = observation_angle(fr.gt_box, t.sensor_origin);
  CHECK(s->gt_alpha.sin_a == doctest::Approx(alpha.sin_a));
  CHECK(s->gt_alpha.cos_a == doctest::Approx(alpha.cos_a));

  const Box7 far(1000, 1000, 0, 1, 1, 1, 0);
  CHECK_FALSE(
      make_search_sample(fr.cloud, far, 2.0, 2.0, 128, 11, far, t.sensor_origin).has_value());
}

TEST_SUITE_END();
