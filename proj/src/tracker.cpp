#include "hvtrack/tracker.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hvt {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Tensor cloud_to_tensor(const PointCloud& pc) {
  Tensor t(pc.size(), 3);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    t.at(i, 0) = pc.points[i].x;
    t.at(i, 1) = pc.points[i].y;
    t.at(i, 2) = pc.points[i].z;
  }
  return t;
}

Tensor mask_at_seeds(const Tensor& seed_coords, const Box7& box_local) {
  PointCloud pts;
  pts.points.reserve(seed_coords.rows);
  for (std::size_t i = 0; i < seed_coords.rows; ++i)
    pts.points.push_back({seed_coords.at(i, 0), seed_coords.at(i, 1), seed_coords.at(i, 2)});
  const auto fg = foreground_mask(pts, box_local);
  Tensor t(seed_coords.rows, 1);
  for (std::size_t i = 0; i < fg.size(); ++i) t.at(i, 0) = double(fg[i]);
  return t;
}

Tensor unit_alpha(double sin_a, double cos_a) {
  const double nrm = std::hypot(sin_a, cos_a);
  if (nrm < 1e-9) return Tensor(1, 2, {0.0, 1.0});
  return Tensor(1, 2, {sin_a / nrm, cos_a / nrm});
}

MemoryEntry make_entry(const ForwardResult& fwd, Tensor mask, Tensor alpha,
                       const ModelConfig& cfg) {
  MemoryEntry e;
  e.layer_feats = fwd.layer_inputs;
  e.mask = std::move(mask);
  e.alpha = std::move(alpha);
  e.coords = fwd.seed_coords;
  if (!cfg.detach_memory) e.layer_feats_var = fwd.layer_inputs_var;
  return e;
}

}  // namespace

std::uint64_t stable_hash(const std::string& s) {
  // FNV-1a; std::hash is not pinned across library versions
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double search_offset_for(Category category, int interval, const ModelConfig& cfg) {
  if (category == Category::Synthetic) return cfg.synth_offset;
  return enlargement_offset(category, interval);
}

double vertical_offset_for(double offset, const ModelConfig& cfg) {
  return cfg.vertical_enlarge < 0 ? offset : cfg.vertical_enlarge;
}

TrackerState init_track(const TrackletFrame& first, const Vec3& sensor_origin,
                        const ParamStore& params, const ModelConfig& cfg, double offset,
                        std::uint64_t seed, bool train) {
  const double voff = vertical_offset_for(offset, cfg);
  const PointCloud cropped = crop_search_area(first.cloud, first.gt_box, offset, voff);
  const auto sampled = sample_points(cropped, cfg.n_in, seed);
  if (!sampled)
    throw std::runtime_error("init_track: empty first-frame crop around the given box");

  const Tensor points = cloud_to_tensor(*sampled);
  const Box7 gt_local = box_to_local(first.gt_box, first.gt_box);
  const ObservationAngle alpha = observation_angle(first.gt_box, sensor_origin);

  TrackerState state;
  state.template_size = {first.gt_box.w, first.gt_box.l, first.gt_box.h};
  state.sensor_origin = sensor_origin;

  // bootstrap bank: backbone features stand in for every layer's history
  MemoryState bootstrap;
  {
    ag::NoGradGuard ng;
    FeatureMapT fm = backbone_forward(points, params, cfg);
    MemoryEntry e;
    e.layer_feats.assign(cfg.layers, fm.feats.val());
    e.mask = mask_at_seeds(fm.coords, gt_local);
    e.alpha = unit_alpha(alpha.sin_a, alpha.cos_a);
    e.coords = fm.coords;
    bootstrap.push(std::move(e), 1);
  }

  ForwardResult fwd;
  if (train) {
    fwd = hvtrack_forward(points, bootstrap, params, cfg, state.template_size,
                          mix_seed(seed, 0x1717), true);
  } else {
    ag::NoGradGuard ng;
    fwd = hvtrack_forward(points, bootstrap, params, cfg, state.template_size, 0, false);
  }

  // first real entry: computed layer features, ground-truth mask and angle
  state.memory.push(
      make_entry(fwd, mask_at_seeds(fwd.seed_coords, gt_local),
                 unit_alpha(alpha.sin_a, alpha.cos_a), cfg),
      train ? cfg.k_train : cfg.k_test);
  return state;
}

StepResult step(TrackerState& state, const PointCloud& cloud, const Box7& last_box,
                double offset, const ParamStore& params, const ModelConfig& cfg,
                std::size_t capacity, std::uint64_t seed) {
  const double voff = vertical_offset_for(offset, cfg);
  const PointCloud cropped = crop_search_area(cloud, last_box, offset, voff);
  const auto sampled = sample_points(cropped, cfg.n_in, seed);
  if (!sampled) return {last_box, true};  // hold the box, freeze the banks

  const Tensor points = cloud_to_tensor(*sampled);
  ag::NoGradGuard ng;
  ForwardResult fwd =
      hvtrack_forward(points, state.memory, params, cfg, state.template_size, 0, false);

  state.memory.push(
      make_entry(fwd, fwd.pred.mask,
                 unit_alpha(fwd.pred.alpha.sin_a, fwd.pred.alpha.cos_a), cfg),
      capacity);
  return {box_to_world(fwd.pred.box_local, last_box), false};
}

TrackRun run_tracklet(const Tracklet& tracklet, const ParamStore& params,
                      const ModelConfig& cfg, int interval, std::uint64_t seed) {
  validate_tracklet(tracklet);
  TrackRun run;
  run.tracklet_id = tracklet.id;
  run.category = tracklet.category;
  const double offset = search_offset_for(tracklet.category, interval, cfg);

  TrackerState state;
  {
    const double t0 = now_seconds();
    try {
      state = init_track(tracklet.frames[0], tracklet.sensor_origin, params, cfg, offset,
                         mix_seed(seed, 0));
    } catch (const std::exception& e) {
      run.skipped = true;
      run.skip_reason = e.what();
      return run;
    }
    run.frame_ids.push_back(tracklet.frames[0].frame_id);
    run.predicted.push_back(tracklet.frames[0].gt_box);
    run.gt.push_back(tracklet.frames[0].gt_box);
    run.wall_time.push_back(now_seconds() - t0);
  }

  Box7 last = tracklet.frames[0].gt_box;
  for (std::size_t i = 1; i < tracklet.frames.size(); ++i) {
    const double t0 = now_seconds();
    const StepResult r = step(state, tracklet.frames[i].cloud, last, offset, params, cfg,
                              cfg.k_test, mix_seed(seed, i));
    last = r.box_world;
    run.frame_ids.push_back(tracklet.frames[i].frame_id);
    run.predicted.push_back(r.box_world);
    run.gt.push_back(tracklet.frames[i].gt_box);
    run.wall_time.push_back(now_seconds() - t0);
    if (r.empty_crop) run.empty_crop_frames.push_back(i);
  }
  return run;
}

std::vector<TrackRun> run_tracklets(const std::vector<Tracklet>& tracklets,
                                    const ParamStore& params, const ModelConfig& cfg,
                                    int interval, std::uint64_t seed,
                                    std::size_t threads) {
  std::vector<TrackRun> runs(tracklets.size());
  if (threads <= 1 || tracklets.size() <= 1) {
    for (std::size_t i = 0; i < tracklets.size(); ++i)
      runs[i] = run_tracklet(tracklets[i], params, cfg, interval,
                             mix_seed(seed, stable_hash(tracklets[i].id)));
    return runs;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tracklets.size()) return;
      runs[i] = run_tracklet(tracklets[i], params, cfg, interval,
                             mix_seed(seed, stable_hash(tracklets[i].id)));
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, tracklets.size()); ++t)
    pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return runs;
}

// ------------------------------------------------------------------ records

void write_track_runs(const std::vector<TrackRun>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write run records: " + path);
  out.precision(17);
  out << "hvtrack-runs v1\n";
  for (const auto& r : runs) {
    out << "run " << r.tracklet_id << ' ' << to_string(r.category) << ' '
        << r.predicted.size() << ' ' << (r.skipped ? 1 : 0) << '\n';
    for (std::size_t i = 0; i < r.predicted.size(); ++i) {
      const Box7& p = r.predicted[i];
      const Box7& g = r.gt[i];
      out << "frame " << r.frame_ids[i] << ' ' << p.cx << ' ' << p.cy << ' ' << p.cz << ' '
          << p.w << ' ' << p.l << ' ' << p.h << ' ' << p.yaw << ' ' << g.cx << ' ' << g.cy
          << ' ' << g.cz << ' ' << g.w << ' ' << g.l << ' ' << g.h << ' ' << g.yaw << ' '
          << r.wall_time[i] << '\n';
    }
  }
}

std::vector<TrackRun> read_track_runs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run records: " + path);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::getline(in, line);
  ++line_no;
  if (line != "hvtrack-runs v1") fail("unrecognized record header");

  std::vector<TrackRun> runs;
  std::size_t expect = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "run") {
      if (expect) fail("previous run is missing frames");
      TrackRun r;
      std::string cat;
      std::size_t n;
      int skipped;
      if (!(ls >> r.tracklet_id >> cat >> n >> skipped)) fail("malformed run line");
      r.category = category_from_string(cat);
      r.skipped = skipped != 0;
      runs.push_back(std::move(r));
      expect = n;
    } else if (tag == "frame") {
      if (runs.empty()) fail("frame before any run");
      if (!expect) fail("more frames than declared");
      TrackRun& r = runs.back();
      int fid;
      double p[7], g[7], wall;
      if (!(ls >> fid >> p[0] >> p[1] >> p[2] >> p[3] >> p[4] >> p[5] >> p[6] >> g[0] >>
            g[1] >> g[2] >> g[3] >> g[4] >> g[5] >> g[6] >> wall))
        fail("malformed frame line");
      r.frame_ids.push_back(fid);
      r.predicted.push_back(Box7(p[0], p[1], p[2], p[3], p[4], p[5], p[6]));
      r.gt.push_back(Box7(g[0], g[1], g[2], g[3], g[4], g[5], g[6]));
      r.wall_time.push_back(wall);
      --expect;
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (expect) fail("truncated record file");
  return runs;
}

}  // namespace hvt
