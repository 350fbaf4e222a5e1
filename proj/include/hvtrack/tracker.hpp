#pragma once

// Online tracking loop: ground-truth initialization on frame 0, per-frame
// search-area construction around the previous prediction, forward pass,
// world-frame recovery and FIFO memory updates.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hvtrack/dataset.hpp"
#include "hvtrack/memory_bank.hpp"
#include "hvtrack/network.hpp"

namespace hvt {

struct TrackRun {
  std::string tracklet_id;
  Category category = Category::Car;
  std::vector<int> frame_ids;
  std::vector<Box7> predicted;     // world frame; entry 0 equals the given box
  std::vector<Box7> gt;            // recorded for evaluation only
  std::vector<double> wall_time;   // seconds per frame
  std::vector<std::size_t> empty_crop_frames;
  bool skipped = false;
  std::string skip_reason;
};

struct TrackerState {
  MemoryState memory;
  std::array<double, 3> template_size{1, 1, 1};  // w, l, h from the first box
  Vec3 sensor_origin{0, 0, 0};
};

// search enlargement for a tracklet category (Synthetic uses the config value)
double search_offset_for(Category category, int interval, const ModelConfig& cfg);
double vertical_offset_for(double offset, const ModelConfig& cfg);

// Crop + sample around the ground-truth box, run one bootstrap forward pass
// (backbone features seed all layer banks; geometric mask and ground-truth
// observation angle seed the other two), then store the resulting layer
// inputs as the first real entry. Throws on an empty first-frame crop.
TrackerState init_track(const TrackletFrame& first, const Vec3& sensor_origin,
                        const ParamStore& params, const ModelConfig& cfg, double offset,
                        std::uint64_t seed, bool train = false);

struct StepResult {
  Box7 box_world;
  bool empty_crop = false;
};

// One tracking step around last_box. On an empty crop the previous box is
// returned and the memory is left untouched. `capacity` is the bank size
// (k_test at inference, k_train while training).
StepResult step(TrackerState& state, const PointCloud& cloud, const Box7& last_box,
                double offset, const ParamStore& params, const ModelConfig& cfg,
                std::size_t capacity, std::uint64_t seed);

// One-pass protocol: initialize from frame 0 ground truth, then track with
// predictions only. Initialization failure yields a skipped record.
TrackRun run_tracklet(const Tracklet& tracklet, const ParamStore& params,
                      const ModelConfig& cfg, int interval, std::uint64_t seed);

// tracklets evaluated independently over `threads` workers, deterministic
// output order and per-tracklet seeds
std::vector<TrackRun> run_tracklets(const std::vector<Tracklet>& tracklets,
                                    const ParamStore& params, const ModelConfig& cfg,
                                    int interval, std::uint64_t seed,
                                    std::size_t threads = 1);

// Line-oriented record file:
//   hvtrack-runs v1
//   run <id> <category> <n_frames> <skipped>
//   frame <frame_id> <pred: cx cy cz w l h yaw> <gt: cx cy cz w l h yaw> <seconds>
void write_track_runs(const std::vector<TrackRun>& runs, const std::string& path);
std::vector<TrackRun> read_track_runs(const std::string& path);  // cites line numbers

// stable 64-bit string hash for deriving per-tracklet seeds
std::uint64_t stable_hash(const std::string& s);

}  // namespace hvt
