#include "lidarscope/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lidarscope {

namespace {

// Vertices closer than this are merged when clipping (avoids sliver polygons).
constexpr double kVertexMergeTol = 1e-9;

struct Vec3 {
  double x, y, z;
};

Vec3 lidar_to_rect(const CameraCalibration& c, const Point3& p) {
  const auto& t = c.lidar_to_camera;
  const double cx = t[0][0] * p.x + t[0][1] * p.y + t[0][2] * p.z + t[0][3];
  const double cy = t[1][0] * p.x + t[1][1] * p.y + t[1][2] * p.z + t[1][3];
  const double cz = t[2][0] * p.x + t[2][1] * p.y + t[2][2] * p.z + t[2][3];
  const auto& r = c.rectification;
  return {r[0][0] * cx + r[0][1] * cy + r[0][2] * cz,
          r[1][0] * cx + r[1][1] * cy + r[1][2] * cz,
          r[2][0] * cx + r[2][1] * cy + r[2][2] * cz};
}

Vec2 project_rect(const CameraCalibration& c, const Vec3& p) {
  const auto& m = c.projection;
  const double u = m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3];
  const double v = m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3];
  const double w = m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3];
  return {u / w, v / w};
}

double footprint_area(const Box3D& b) { return b.length * b.width; }

void check_not_degenerate(const Box3D& b, const char* what) {
  if (!(footprint_area(b) > 0.0)) {
    throw DataError(std::string(what) + ": degenerate zero-area box footprint");
  }
}

}  // namespace

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;  // remainder returns [-pi, pi]; map -pi to +pi
  return r;
}

double wrap_two_pi(double a) {
  double r = std::fmod(a, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  if (r >= 2.0 * kPi) r = 0.0;
  return r;
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const Rot2 rot = Rot2::from_angle(box.yaw);
  const Vec2 c{box.center.x, box.center.y};
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  return {c + rot.apply({hl, hw}), c + rot.apply({-hl, hw}), c + rot.apply({-hl, -hw}),
          c + rot.apply({hl, -hw})};
}

bool point_in_footprint(const Box3D& box, const Vec2& p, double tol) {
  const Rot2 rot = Rot2::from_angle(box.yaw);
  const Vec2 local = rot.apply_inverse(p - Vec2{box.center.x, box.center.y});
  return std::abs(local.x) <= 0.5 * box.length + tol && std::abs(local.y) <= 0.5 * box.width + tol;
}

bool point_in_box(const Box3D& box, const Point3& p, double tol) {
  if (std::abs(p.z - box.center.z) > 0.5 * box.height + tol) return false;
  return point_in_footprint(box, {p.x, p.y}, tol);
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    twice += cross(a, b);
  }
  return 0.5 * twice;
}

std::vector<Vec2> clip_convex_quad(const std::vector<Vec2>& subject, const std::array<Vec2, 4>& clip) {
  std::vector<Vec2> poly = subject;
  std::vector<Vec2> next;
  for (int e = 0; e < 4 && !poly.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % 4];
    const Vec2 edge = b - a;
    next.clear();
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
      const Vec2& p = poly[i];
      const Vec2& q = poly[(i + 1) % n];
      const double sp = cross(edge, p - a);
      const double sq = cross(edge, q - a);
      if (sp >= 0.0) next.push_back(p);
      if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
        const double t = sp / (sp - sq);
        next.push_back(p + t * (q - p));
      }
    }
    poly.swap(next);
  }
  // Merge near-duplicate vertices.
  std::vector<Vec2> merged;
  for (const Vec2& v : poly) {
    if (merged.empty() || norm(v - merged.back()) > kVertexMergeTol) merged.push_back(v);
  }
  while (merged.size() > 1 && norm(merged.front() - merged.back()) <= kVertexMergeTol) {
    merged.pop_back();
  }
  return merged;
}

double iou_bev(const Box3D& a, const Box3D& b) {
  check_not_degenerate(a, "iou_bev");
  check_not_degenerate(b, "iou_bev");
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const std::vector<Vec2> subject(ca.begin(), ca.end());
  const std::vector<Vec2> inter = clip_convex_quad(subject, cb);
  const double inter_area = std::max(0.0, polygon_area(inter));
  const double union_area = footprint_area(a) + footprint_area(b) - inter_area;
  if (union_area <= 0.0) return 0.0;
  return std::clamp(inter_area / union_area, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  check_not_degenerate(a, "iou_3d");
  check_not_degenerate(b, "iou_3d");
  if (!(a.height > 0.0) || !(b.height > 0.0)) {
    throw DataError("iou_3d: degenerate zero-height box");
  }
  const double lo = std::max(a.center.z - 0.5 * a.height, b.center.z - 0.5 * b.height);
  const double hi = std::min(a.center.z + 0.5 * a.height, b.center.z + 0.5 * b.height);
  const double dz = hi - lo;
  if (dz <= 0.0) return 0.0;
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const std::vector<Vec2> subject(ca.begin(), ca.end());
  const double inter_area = std::max(0.0, polygon_area(clip_convex_quad(subject, cb)));
  const double inter_vol = inter_area * dz;
  const double union_vol =
      footprint_area(a) * a.height + footprint_area(b) * b.height - inter_vol;
  if (union_vol <= 0.0) return 0.0;
  return std::clamp(inter_vol / union_vol, 0.0, 1.0);
}

std::optional<Aabb2D> project_box_to_image(const Box3D& box, const CameraCalibration& calib) {
  // Box corners in rectified camera coordinates.
  const Rot2 rot = Rot2::from_angle(box.yaw);
  std::array<Vec3, 8> rect;
  int idx = 0;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      for (int sz : {-1, 1}) {
        const Vec2 d = rot.apply({sx * 0.5 * box.length, sy * 0.5 * box.width});
        const Point3 corner{box.center.x + d.x, box.center.y + d.y,
                            box.center.z + sz * 0.5 * box.height};
        rect[idx++] = lidar_to_rect(calib, corner);
      }
    }
  }

  constexpr double kNearDepth = 1e-3;
  bool any_in_front = false;
  for (const auto& p : rect) any_in_front = any_in_front || p.z > kNearDepth;
  if (!any_in_front) return std::nullopt;

  // Edges of the box as corner-index pairs (4 per footprint ring + 4 vertical).
  // Corner order above: bit0 = z, bit1 = y, bit2 = x.
  static constexpr int kEdges[12][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {0, 2}, {1, 3},
                                        {4, 6}, {5, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

  double min_u = std::numeric_limits<double>::infinity();
  double min_v = std::numeric_limits<double>::infinity();
  double max_u = -std::numeric_limits<double>::infinity();
  double max_v = -std::numeric_limits<double>::infinity();
  auto extend = [&](const Vec3& p) {
    const Vec2 uv = project_rect(calib, p);
    min_u = std::min(min_u, uv.x);
    min_v = std::min(min_v, uv.y);
    max_u = std::max(max_u, uv.x);
    max_v = std::max(max_v, uv.y);
  };

  for (const auto& p : rect) {
    if (p.z > kNearDepth) extend(p);
  }
  // Clip edges crossing the near plane and include the crossing points.
  for (const auto& e : kEdges) {
    const Vec3& p = rect[e[0]];
    const Vec3& q = rect[e[1]];
    if ((p.z > kNearDepth) == (q.z > kNearDepth)) continue;
    const double t = (kNearDepth - p.z) / (q.z - p.z);
    extend({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y), kNearDepth});
  }

  const Aabb2D clipped{std::clamp(min_u, 0.0, static_cast<double>(calib.image_width)),
                       std::clamp(min_v, 0.0, static_cast<double>(calib.image_height)),
                       std::clamp(max_u, 0.0, static_cast<double>(calib.image_width)),
                       std::clamp(max_v, 0.0, static_cast<double>(calib.image_height))};
  if (clipped.width() <= 0.0 || clipped.height() <= 0.0) return std::nullopt;
  return clipped;
}

double iou_2d(const Aabb2D& a, const Aabb2D& b) {
  const double iw = std::min(a.max_u, b.max_u) - std::max(a.min_u, b.min_u);
  const double ih = std::min(a.max_v, b.max_v) - std::max(a.min_v, b.min_v);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

}  // namespace lidarscope
