#pragma once

// One-pass-evaluation metrics: Success (IoU-threshold AUC) and Precision
// (center-distance AUC) over 21-point grids, frame-weighted aggregation and
// the text report.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hvtrack/tracker.hpp"

namespace hvt {

// threshold grids are configurable; these are the defaults used everywhere
struct MetricGrid {
  double iou_step = 0.05;   // tau in {0, 0.05, ..., 1.0}
  double dist_step = 0.1;   // tau in {0, 0.1, ..., 2.0}
  std::size_t points = 21;
};

// mean over the grid of fraction(IoU > tau), times 100
double success_score(const std::vector<double>& ious, const MetricGrid& grid = {});
// mean over the grid of fraction(distance < tau), times 100
double precision_score(const std::vector<double>& dists, const MetricGrid& grid = {});

struct TrackletScore {
  std::string id;
  Category category = Category::Car;
  std::size_t frames = 0;
  double success = 0, precision = 0;
};

struct OPEReport {
  double success = 0;    // frame-weighted mean, [0, 100]
  double precision = 0;
  std::size_t total_frames = 0;
  std::size_t skipped_tracklets = 0;
  double mean_fps = 0;
  std::vector<TrackletScore> per_tracklet;
  std::map<std::string, std::size_t> frames_per_category;
  // pooled threshold curves for plotting (grid.points entries each)
  std::vector<double> success_curve;
  std::vector<double> precision_curve;
  // per-run series, aligned with per_tracklet
  std::vector<std::vector<double>> iou_series;
  std::vector<std::vector<double>> dist_series;
};

OPEReport evaluate(const std::vector<TrackRun>& runs, const MetricGrid& grid = {});

std::string report_text(const OPEReport& report);
void write_report(const OPEReport& report, const std::string& path);

}  // namespace hvt
