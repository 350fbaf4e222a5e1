#pragma once

// Synthetic lidar-like tracklets with controllable temporal variation: a
// rigid box target on a jittered constant-velocity trajectory, surface
// points culled to the faces visible from the sensor, same-size distractor
// boxes and uniform ground clutter.

#include <cstdint>

#include "hvtrack/dataset.hpp"

namespace hvt {

struct SynthConfig {
  int n_frames = 20;
  double target_w = 1.8, target_l = 4.2, target_h = 1.6;
  double speed_range = 0.5;       // meters per frame
  double yaw_rate_range = 0.15;   // radians per frame
  int n_distractors = 2;
  double clutter_density = 0.02;  // points per m^2 of arena floor
  double surface_point_density = 40.0;  // points per m^2 of box face
  double arena_half = 25.0;       // square arena bound, meters
  double sensor_x = 0.0, sensor_y = 0.0, sensor_z = 1.8;
  std::uint64_t seed = 1;
  // pin the target's initial pose (scenario control); rng consumption is
  // unchanged so the surface pattern stays comparable across poses
  bool fix_start = false;
  double start_x = 0, start_y = 0, start_yaw = 0;
};

void validate(const SynthConfig& cfg);  // throws on invalid fields

SynthConfig synth_config_from_text(const std::string& text);
std::string to_text(const SynthConfig& cfg);

Tracklet generate_sequence(const SynthConfig& cfg);
std::vector<Tracklet> generate_dataset(const SynthConfig& cfg, int n_tracklets);

}  // namespace hvt
