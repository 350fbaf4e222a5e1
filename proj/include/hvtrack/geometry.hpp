#pragma once

// Oriented-box math used across the tracker: corners, rotated 3d IoU,
// observation angles and canonical-frame transforms. Pure functions, no
// shared state.

#include <array>
#include <cstddef>
#include <vector>

namespace hvt {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Oriented 3d box: center, size (width across / length along the heading /
// height), yaw about +z normalized to (-pi, pi]. Sizes must be positive.
struct Box7 {
  double cx = 0, cy = 0, cz = 0;
  double w = 1, l = 1, h = 1;
  double yaw = 0;

  Box7() = default;
  Box7(double cx_, double cy_, double cz_, double w_, double l_, double h_, double yaw_);
};

struct ObservationAngle {
  double sin_a = 0;
  double cos_a = 1;
};

// wrap to (-pi, pi]
double wrap_angle(double a);

// Corner order: bottom face counter-clockwise viewed from +z starting at
// (+l/2, +w/2, -h/2) in the box frame, then the top face in the same order.
std::array<Vec3, 8> box_corners(const Box7& box);

// Volume IoU: rotated BEV rectangle intersection (Sutherland-Hodgman
// clipping) times the vertical interval overlap. Returns 0 for disjoint or
// degenerate intersections.
double iou3d(const Box7& a, const Box7& b);

double center_distance(const Box7& a, const Box7& b);

// alpha = wrap(yaw - atan2(cy - oy, cx - ox)). Throws if the box center sits
// within 1e-9 m of the sensor in the horizontal plane.
ObservationAngle observation_angle(const Box7& box, const Vec3& sensor_origin);

// Canonical frame of a reference box: translate by -center, rotate by -yaw.
Vec3 to_local_point(const Vec3& p, const Box7& ref);
Vec3 to_world_point(const Vec3& p, const Box7& ref);
PointCloud to_local_frame(const PointCloud& cloud, const Box7& ref);
PointCloud to_world_frame(const PointCloud& cloud, const Box7& ref);
Box7 box_to_local(const Box7& box, const Box7& ref);
Box7 box_to_world(const Box7& box, const Box7& ref);

// boundary counts as inside
bool point_in_box(const Vec3& p, const Box7& box);

}  // namespace hvt
