#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "hvtrack/synth.hpp"
#include "hvtrack/tracker.hpp"
#include "testutil.hpp"

using namespace hvt;
using testutil::toy_config;

namespace {

constexpr double kPi = std::numbers::pi;

SynthConfig tracker_synth_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_frames = 10;
  cfg.speed_range = 0.3;
  cfg.yaw_rate_range = 0.1;
  cfg.n_distractors = 1;
  cfg.clutter_density = 0.005;
  cfg.surface_point_density = 12.0;
  cfg.seed = seed;
  return cfg;
}

Tracklet synth_tracklet(std::uint64_t seed) {
  Tracklet t = generate_sequence(tracker_synth_config(seed));
  t.category = Category::Synthetic;
  return t;
}

bool same_box(const Box7& a, const Box7& b, double tol = 0.0) {
  return std::abs(a.cx - b.cx) <= tol && std::abs(a.cy - b.cy) <= tol &&
         std::abs(a.cz - b.cz) <= tol && std::abs(a.yaw - b.yaw) <= tol && a.w == b.w &&
         a.l == b.l && a.h == b.h;
}

}  // namespace

TEST_SUITE_BEGIN("tracker");

TEST_CASE("init: single entry seeded from ground truth") {
  ModelConfig cfg = toy_config();
  ParamStore p = init_params(cfg);
  const Tracklet t = synth_tracklet(7);

  const TrackerState state =
      init_track(t.frames[0], t.sensor_origin, p, cfg, 2.0, 11);
  CHECK(state.memory.fill() == 1);
  CHECK_NOTHROW(state.memory.check(cfg));

  const MemoryEntry& e = state.memory.entries()[0];
  // om holds the exact ground-truth observation angle
  const auto alpha = observation_angle(t.frames[0].gt_box, t.sensor_origin);
  CHECK(e.alpha.v[0] == doctest::Approx(alpha.sin_a).epsilon(1e-12));
  CHECK(e.alpha.v[1] == doctest::Approx(alpha.cos_a).epsilon(1e-12));
  // mm is the geometric mask of the stored points against the local gt box
  const Box7 gt_local = box_to_local(t.frames[0].gt_box, t.frames[0].gt_box);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const Vec3 pt{e.coords.at(i, 0), e.coords.at(i, 1), e.coords.at(i, 2)};
    CHECK(e.mask.at(i, 0) == (point_in_box(pt, gt_local) ? 1.0 : 0.0));
  }
  CHECK(e.layer_feats.size() == cfg.layers);

  // template size travels from the first box
  CHECK(state.template_size[0] == t.frames[0].gt_box.w);
  CHECK(state.template_size[1] == t.frames[0].gt_box.l);
  CHECK(state.template_size[2] == t.frames[0].gt_box.h);

  // empty first-frame crop is an unrecoverable initialization error
  TrackletFrame empty = t.frames[0];
  empty.gt_box = Box7(500, 500, 0, 1, 1, 1, 0);
  CHECK_THROWS(init_track(empty, t.sensor_origin, p, cfg, 2.0, 11));
}

TEST_CASE("step: fifo capacity and sliding window order") {
  ModelConfig cfg = toy_config();
  cfg.k_test = 3;
  ParamStore p = init_params(cfg);
  const Tracklet t = synth_tracklet(8);

  TrackerState state = init_track(t.frames[0], t.sensor_origin, p, cfg, 2.0, 1);
  Box7 last = t.frames[0].gt_box;

  std::vector<Tensor> pushed;  // coords of each pushed entry, oldest first
  pushed.push_back(state.memory.entries()[0].coords);

  const std::size_t steps = cfg.k_test + 3;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto& frame = t.frames[1 + s % (t.frames.size() - 1)];
    const StepResult r = step(state, frame.cloud, last, 2.0, p, cfg, cfg.k_test, 100 + s);
    REQUIRE_FALSE(r.empty_crop);
    last = r.box_world;
    pushed.push_back(state.memory.entries().back().coords);

    const std::size_t expect_fill = std::min<std::size_t>(cfg.k_test, pushed.size());
    CHECK(state.memory.fill() == expect_fill);
    // the banks hold exactly the most recent entries, oldest first
    for (std::size_t i = 0; i < expect_fill; ++i) {
      const Tensor& want = pushed[pushed.size() - expect_fill + i];
      const Tensor& got = state.memory.entries()[i].coords;
      REQUIRE(got.numel() == want.numel());
      for (std::size_t j = 0; j < got.numel(); ++j) CHECK(got.v[j] == want.v[j]);
    }
  }
  CHECK(state.memory.fill() == cfg.k_test);
}

TEST_CASE("step: empty crop holds the box and freezes the banks") {
  ModelConfig cfg = toy_config();
  ParamStore p = init_params(cfg);
  const Tracklet t = synth_tracklet(9);
  TrackerState state = init_track(t.frames[0], t.sensor_origin, p, cfg, 2.0, 1);

  const Box7 lost(900, 900, 0, 1.8, 4.2, 1.6, 0.4);
  const Tensor before = state.memory.entries()[0].coords;
  const std::size_t fill_before = state.memory.fill();
  const StepResult r = step(state, t.frames[1].cloud, lost, 2.0, p, cfg, cfg.k_test, 5);
  CHECK(r.empty_crop);
  CHECK(same_box(r.box_world, lost));
  CHECK(state.memory.fill() == fill_before);
  for (std::size_t j = 0; j < before.numel(); ++j)
    CHECK(state.memory.entries()[0].coords.v[j] == before.v[j]);
}

TEST_CASE("step is equivariant under a rigid transform of the scene") {
  ModelConfig cfg = toy_config();
  ParamStore p = init_params(cfg);
  const Tracklet t = synth_tracklet(10);

  // the transform moves scene, boxes and sensor together
  const Box7 motion(3.0, -2.0, 0.5, 1, 1, 1, 0.7);

  TrackerState s1 = init_track(t.frames[0], t.sensor_origin, p, cfg, 2.0, 21);

  TrackletFrame moved0 = t.frames[0];
  moved0.cloud = to_world_frame(t.frames[0].cloud, motion);
  moved0.gt_box = box_to_world(t.frames[0].gt_box, motion);
  const Vec3 sensor2 = to_world_point(t.sensor_origin, motion);
  TrackerState s2 = init_track(moved0, sensor2, p, cfg, 2.0, 21);

  Box7 last1 = t.frames[0].gt_box;
  Box7 last2 = moved0.gt_box;
  for (std::size_t i = 1; i < 4; ++i) {
    const StepResult r1 = step(s1, t.frames[i].cloud, last1, 2.0, p, cfg, cfg.k_test, 30 + i);
    const StepResult r2 = step(s2, to_world_frame(t.frames[i].cloud, motion), last2, 2.0, p,
                               cfg, cfg.k_test, 30 + i);
    REQUIRE_FALSE(r1.empty_crop);
    REQUIRE_FALSE(r2.empty_crop);
    const Box7 expect = box_to_world(r1.box_world, motion);
    CHECK(std::abs(r2.box_world.cx - expect.cx) <= 1e-5);
    CHECK(std::abs(r2.box_world.cy - expect.cy) <= 1e-5);
    CHECK(std::abs(r2.box_world.cz - expect.cz) <= 1e-5);
    CHECK(std::abs(wrap_angle(r2.box_world.yaw - expect.yaw)) <= 1e-5);
    last1 = r1.box_world;
    last2 = r2.box_world;
  }
}

TEST_CASE("run_tracklet: protocol basics and determinism") {
  ModelConfig cfg = toy_config();
  ParamStore p = init_params(cfg);

  // single-frame tracklet: the run is exactly the initial box
  Tracklet single = synth_tracklet(12);
  single.frames.resize(1);
  const TrackRun one = run_tracklet(single, p, cfg, 1, 3);
  REQUIRE_FALSE(one.skipped);
  REQUIRE(one.predicted.size() == 1);
  CHECK(same_box(one.predicted[0], single.frames[0].gt_box));

  const Tracklet t = synth_tracklet(13);
  const TrackRun a = run_tracklet(t, p, cfg, 1, 3);
  const TrackRun b = run_tracklet(t, p, cfg, 1, 3);
  REQUIRE_FALSE(a.skipped);
  REQUIRE(a.predicted.size() == t.frames.size());
  CHECK(same_box(a.predicted[0], t.frames[0].gt_box));
  for (std::size_t i = 0; i < a.predicted.size(); ++i)
    CHECK(same_box(a.predicted[i], b.predicted[i]));  // bit-identical

  // init failure produces a skipped record, not a crash
  Tracklet doomed = t;
  for (auto& f : doomed.frames) f.cloud.points.clear();
  const TrackRun skipped = run_tracklet(doomed, p, cfg, 1, 3);
  CHECK(skipped.skipped);
  CHECK_FALSE(skipped.skip_reason.empty());

  // parallel evaluation returns the same runs in the same order
  const std::vector<Tracklet> batch{t, synth_tracklet(14)};
  const auto seq = run_tracklets(batch, p, cfg, 1, 9, 1);
  const auto par = run_tracklets(batch, p, cfg, 1, 9, 2);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    REQUIRE(seq[i].predicted.size() == par[i].predicted.size());
    for (std::size_t f = 0; f < seq[i].predicted.size(); ++f)
      CHECK(same_box(seq[i].predicted[f], par[i].predicted[f]));
  }
}

TEST_CASE("k_test sweep: a k_train=2 model evaluates at any memory size") {
  ModelConfig cfg = toy_config();
  cfg.k_train = 2;
  ParamStore p = init_params(cfg);
  const Tracklet t = synth_tracklet(15);
  for (std::size_t k = 1; k <= 8; ++k) {
    ModelConfig swept = cfg;
    swept.k_test = k;
    const TrackRun run = run_tracklet(t, p, swept, 1, 4);
    REQUIRE_FALSE(run.skipped);
    CHECK(run.predicted.size() == t.frames.size());
  }
}

TEST_CASE("record files round trip and cite malformed lines") {
  namespace fs = std::filesystem;
  ModelConfig cfg = toy_config();
  ParamStore p = init_params(cfg);
  const std::vector<Tracklet> batch{synth_tracklet(16)};
  const auto runs = run_tracklets(batch, p, cfg, 1, 5, 1);

  const fs::path path = fs::temp_directory_path() / "hvt_test_runs.txt";
  write_track_runs(runs, path.string());
  const auto back = read_track_runs(path.string());
  REQUIRE(back.size() == runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    CHECK(back[i].tracklet_id == runs[i].tracklet_id);
    REQUIRE(back[i].predicted.size() == runs[i].predicted.size());
    for (std::size_t f = 0; f < runs[i].predicted.size(); ++f) {
      CHECK(same_box(back[i].predicted[f], runs[i].predicted[f]));
      CHECK(same_box(back[i].gt[f], runs[i].gt[f]));
      CHECK(back[i].wall_time[f] == runs[i].wall_time[f]);
    }
  }

  // a malformed line is reported with its number
  {
    std::ofstream out(path);
    out << "hvtrack-runs v1\nrun a Car 1 0\nframe banana\n";
  }
  try {
    read_track_runs(path.string());
    FAIL("expected parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("search offsets per category honor the config override") {
  ModelConfig cfg = toy_config();
  cfg.synth_offset = 2.5;
  CHECK(search_offset_for(Category::Synthetic, 5, cfg) == 2.5);
  CHECK(search_offset_for(Category::Car, 5, cfg) == 4.0);
  CHECK(vertical_offset_for(3.0, cfg) == 3.0);  // mirrors the offset by default
  cfg.vertical_enlarge = 0.0;                   // strict w/l-only cropping
  CHECK(vertical_offset_for(3.0, cfg) == 0.0);
}

TEST_SUITE_END();
