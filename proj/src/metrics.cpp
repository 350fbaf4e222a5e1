#include "hvtrack/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hvtrack/geometry.hpp"

namespace hvt {

namespace {

double grid_auc(const std::vector<double>& values, double step, std::size_t points,
                bool strictly_greater) {
  if (values.empty()) throw std::invalid_argument("metric scores need a non-empty series");
  double acc = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double tau = double(i) * step;
    std::size_t pass = 0;
    for (double v : values) pass += strictly_greater ? (v > tau) : (v < tau);
    acc += double(pass) / double(values.size());
  }
  return acc / double(points) * 100.0;
}

}  // namespace

double success_score(const std::vector<double>& ious, const MetricGrid& grid) {
  return grid_auc(ious, grid.iou_step, grid.points, /*strictly_greater=*/true);
}

double precision_score(const std::vector<double>& dists, const MetricGrid& grid) {
  return grid_auc(dists, grid.dist_step, grid.points, /*strictly_greater=*/false);
}

OPEReport evaluate(const std::vector<TrackRun>& runs, const MetricGrid& grid) {
  if (runs.empty()) throw std::invalid_argument("evaluate: no runs");
  OPEReport rep;
  double weighted_success = 0, weighted_precision = 0, total_wall = 0;

  std::vector<double> all_ious, all_dists;
  for (const auto& run : runs) {
    if (run.skipped) {
      ++rep.skipped_tracklets;
      continue;
    }
    std::vector<double> ious, dists;
    ious.reserve(run.predicted.size());
    for (std::size_t i = 0; i < run.predicted.size(); ++i) {
      ious.push_back(iou3d(run.predicted[i], run.gt[i]));
      dists.push_back(center_distance(run.predicted[i], run.gt[i]));
      total_wall += run.wall_time[i];
    }
    TrackletScore ts;
    ts.id = run.tracklet_id;
    ts.category = run.category;
    ts.frames = ious.size();
    ts.success = success_score(ious, grid);
    ts.precision = precision_score(dists, grid);
    weighted_success += ts.success * double(ts.frames);
    weighted_precision += ts.precision * double(ts.frames);
    rep.total_frames += ts.frames;
    rep.frames_per_category[to_string(run.category)] += ts.frames;
    all_ious.insert(all_ious.end(), ious.begin(), ious.end());
    all_dists.insert(all_dists.end(), dists.begin(), dists.end());
    rep.per_tracklet.push_back(std::move(ts));
    rep.iou_series.push_back(std::move(ious));
    rep.dist_series.push_back(std::move(dists));
  }
  if (rep.total_frames == 0) throw std::runtime_error("evaluate: every run was skipped");

  rep.success = weighted_success / double(rep.total_frames);
  rep.precision = weighted_precision / double(rep.total_frames);
  rep.mean_fps = total_wall > 0 ? double(rep.total_frames) / total_wall : 0.0;

  for (std::size_t i = 0; i < grid.points; ++i) {
    const double iou_tau = double(i) * grid.iou_step;
    const double dist_tau = double(i) * grid.dist_step;
    std::size_t sp = 0, pp = 0;
    for (double v : all_ious) sp += v > iou_tau;
    for (double v : all_dists) pp += v < dist_tau;
    rep.success_curve.push_back(double(sp) / double(all_ious.size()));
    rep.precision_curve.push_back(double(pp) / double(all_dists.size()));
  }
  return rep;
}

std::string report_text(const OPEReport& rep) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "success = %.2f\nprecision = %.2f\n", rep.success,
                rep.precision);
  out << "hvtrack-report v1\n" << buf;
  out << "frames = " << rep.total_frames << '\n';
  out << "tracklets = " << rep.per_tracklet.size() << '\n';
  out << "skipped = " << rep.skipped_tracklets << '\n';
  std::snprintf(buf, sizeof buf, "mean_fps = %.2f\n", rep.mean_fps);
  out << buf;
  for (const auto& [cat, frames] : rep.frames_per_category)
    out << "category " << cat << " frames = " << frames << '\n';
  out << "\nid category frames success precision\n";
  for (const auto& ts : rep.per_tracklet) {
    std::snprintf(buf, sizeof buf, "%s %s %zu %.2f %.2f\n", ts.id.c_str(),
                  to_string(ts.category), ts.frames, ts.success, ts.precision);
    out << buf;
  }
  return out.str();
}

void write_report(const OPEReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << report_text(report);
}

}  // namespace hvt
