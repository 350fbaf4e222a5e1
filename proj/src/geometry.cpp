#include "hvtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hvt {

namespace {

struct Vec2 {
  double x = 0, y = 0;
};

double cross2(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

// BEV footprint, counter-clockwise
std::array<Vec2, 4> bev_corners(const Box7& b) {
  const double hl = 0.5 * b.l, hw = 0.5 * b.w;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const std::array<Vec2, 4> local = {Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw}, Vec2{hl, -hw}};
  std::array<Vec2, 4> out{};
  for (int i = 0; i < 4; ++i)
    out[i] = {b.cx + c * local[i].x - s * local[i].y,
              b.cy + s * local[i].x + c * local[i].y};
  return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    acc += p.x * q.y - p.y * q.x;
  }
  return std::abs(acc) * 0.5;
}

// Sutherland-Hodgman: clip a polygon against one directed edge (a -> b) of a
// counter-clockwise convex clip polygon. Points on the edge count as inside.
std::vector<Vec2> clip_edge(const std::vector<Vec2>& poly, const Vec2& a, const Vec2& b) {
  std::vector<Vec2> out;
  if (poly.empty()) return out;
  const Vec2 dir{b.x - a.x, b.y - a.y};
  auto side = [&](const Vec2& p) { return cross2(dir, Vec2{p.x - a.x, p.y - a.y}); };
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& cur = poly[i];
    const Vec2& prev = poly[(i + n - 1) % n];
    const double sc = side(cur), sp = side(prev);
    const bool cur_in = sc >= 0.0, prev_in = sp >= 0.0;
    if (cur_in != prev_in) {
      const double t = sp / (sp - sc);
      out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
    }
    if (cur_in) out.push_back(cur);
  }
  return out;
}

double bev_intersection_area(const Box7& a, const Box7& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<Vec2> poly(ca.begin(), ca.end());
  for (int i = 0; i < 4; ++i) poly = clip_edge(poly, cb[i], cb[(i + 1) % 4]);
  return polygon_area(poly);
}

}  // namespace

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

Box7::Box7(double cx_, double cy_, double cz_, double w_, double l_, double h_, double yaw_)
    : cx(cx_), cy(cy_), cz(cz_), w(w_), l(l_), h(h_), yaw(wrap_angle(yaw_)) {
  if (!(w > 0.0) || !(l > 0.0) || !(h > 0.0))
    throw std::invalid_argument("Box7: sizes must be strictly positive");
}

std::array<Vec3, 8> box_corners(const Box7& box) {
  const double hl = 0.5 * box.l, hw = 0.5 * box.w, hh = 0.5 * box.h;
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const std::array<Vec2, 4> local = {Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw}, Vec2{hl, -hw}};
  std::array<Vec3, 8> out{};
  for (int i = 0; i < 4; ++i) {
    const double x = box.cx + c * local[i].x - s * local[i].y;
    const double y = box.cy + s * local[i].x + c * local[i].y;
    out[i] = {x, y, box.cz - hh};
    out[i + 4] = {x, y, box.cz + hh};
  }
  return out;
}

double iou3d(const Box7& a, const Box7& b) {
  const double area = bev_intersection_area(a, b);
  if (area <= 0.0) return 0.0;
  const double z0 = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  const double z1 = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
  const double dz = z1 - z0;
  if (dz <= 0.0) return 0.0;
  const double inter = area * dz;
  const double vol_a = a.w * a.l * a.h;
  const double vol_b = b.w * b.l * b.h;
  const double uni = vol_a + vol_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_distance(const Box7& a, const Box7& b) {
  const double dx = a.cx - b.cx, dy = a.cy - b.cy, dz = a.cz - b.cz;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

ObservationAngle observation_angle(const Box7& box, const Vec3& sensor_origin) {
  const double dx = box.cx - sensor_origin.x;
  const double dy = box.cy - sensor_origin.y;
  if (std::sqrt(dx * dx + dy * dy) < 1e-9)
    throw std::domain_error("observation_angle: box center directly above/below sensor");
  const double alpha = wrap_angle(box.yaw - std::atan2(dy, dx));
  return {std::sin(alpha), std::cos(alpha)};
}

Vec3 to_local_point(const Vec3& p, const Box7& ref) {
  const double c = std::cos(ref.yaw), s = std::sin(ref.yaw);
  const double tx = p.x - ref.cx, ty = p.y - ref.cy;
  // rotate by -yaw
  return {c * tx + s * ty, -s * tx + c * ty, p.z - ref.cz};
}

Vec3 to_world_point(const Vec3& p, const Box7& ref) {
  const double c = std::cos(ref.yaw), s = std::sin(ref.yaw);
  return {ref.cx + c * p.x - s * p.y, ref.cy + s * p.x + c * p.y, ref.cz + p.z};
}

PointCloud to_local_frame(const PointCloud& cloud, const Box7& ref) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(to_local_point(p, ref));
  return out;
}

PointCloud to_world_frame(const PointCloud& cloud, const Box7& ref) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(to_world_point(p, ref));
  return out;
}

Box7 box_to_local(const Box7& box, const Box7& ref) {
  const Vec3 c = to_local_point({box.cx, box.cy, box.cz}, ref);
  return Box7(c.x, c.y, c.z, box.w, box.l, box.h, wrap_angle(box.yaw - ref.yaw));
}

Box7 box_to_world(const Box7& box, const Box7& ref) {
  const Vec3 c = to_world_point({box.cx, box.cy, box.cz}, ref);
  return Box7(c.x, c.y, c.z, box.w, box.l, box.h, wrap_angle(box.yaw + ref.yaw));
}

bool point_in_box(const Vec3& p, const Box7& box) {
  const Vec3 q = to_local_point(p, box);
  return std::abs(q.x) <= 0.5 * box.l && std::abs(q.y) <= 0.5 * box.w &&
         std::abs(q.z) <= 0.5 * box.h;
}

}  // namespace hvt
