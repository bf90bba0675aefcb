#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "lidarscope/common.hpp"

namespace lidarscope {

enum class ObjectClass : int {
  kVehicle = 0,
  kVulnerableRoadUser = 1,
};

constexpr int kNumClasses = 2;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double k, const Vec2& v) { return {k * v.x, k * v.y}; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

// Sensor-frame 3D point: x forward, y left, z up (right-handed), meters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Point3 operator*(double k, const Point3& p) { return {k * p.x, k * p.y, k * p.z}; }
inline double norm(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

// 2D rotation, applied as column-vector multiplication.
struct Rot2 {
  double c = 1.0;
  double s = 0.0;

  static Rot2 from_angle(double a) { return {std::cos(a), std::sin(a)}; }

  Vec2 apply(const Vec2& v) const { return {c * v.x - s * v.y, c * v.y + s * v.x}; }
  Vec2 apply_inverse(const Vec2& v) const { return {c * v.x + s * v.y, c * v.y - s * v.x}; }
};

// Upright oriented box. `length` is the extent along the heading (yaw)
// direction, `width` across it, `height` along z. Yaw is counter-clockwise
// around +z, 0 = facing +x.
struct Box3D {
  Point3 center;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  double yaw = 0.0;
  ObjectClass class_id = ObjectClass::kVehicle;
};

// Pixel-space axis-aligned rectangle.
struct Aabb2D {
  double min_u = 0.0;
  double min_v = 0.0;
  double max_u = 0.0;
  double max_v = 0.0;

  double width() const { return max_u - min_u; }
  double height() const { return max_v - min_v; }
};

// KITTI-style camera model: u ~ projection * [rectification * (lidar_to_camera * X)].
struct CameraCalibration {
  std::array<std::array<double, 4>, 3> projection = {{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}};
  std::array<std::array<double, 3>, 3> rectification = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  std::array<std::array<double, 4>, 4> lidar_to_camera = {
      {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
  int image_width = 1242;
  int image_height = 375;
};

// Counter-clockwise corners of the yaw-rotated length x width footprint.
std::array<Vec2, 4> bev_corners(const Box3D& box);

// True if the horizontal projection of p lies in the box footprint
// (closed, with tolerance `tol` in meters on each half-extent).
bool point_in_footprint(const Box3D& box, const Vec2& p, double tol = 0.0);

// True if p lies inside the (closed) box volume.
bool point_in_box(const Box3D& box, const Point3& p, double tol = 0.0);

// Area of a simple polygon via the shoelace formula (positive for CCW).
double polygon_area(const std::vector<Vec2>& poly);

// Sutherland-Hodgman clip of a convex polygon against a convex CCW clip quad.
// Output vertices closer than 1e-9 m are merged.
std::vector<Vec2> clip_convex_quad(const std::vector<Vec2>& subject, const std::array<Vec2, 4>& clip);

// Footprint intersection-over-union. Throws DataError for degenerate
// (non-positive footprint area) boxes.
double iou_bev(const Box3D& a, const Box3D& b);

// Volume intersection-over-union for upright boxes (yaw-only rotation).
// Throws DataError for degenerate boxes.
double iou_3d(const Box3D& a, const Box3D& b);

// Axis-aligned hull of the projected box corners, clipped to the image.
// Box edges crossing the camera plane are clipped at a small positive depth.
// Returns nullopt when no part of the box is in front of the camera or the
// hull misses the image entirely.
std::optional<Aabb2D> project_box_to_image(const Box3D& box, const CameraCalibration& calib);

// Standard rectangle IoU.
double iou_2d(const Aabb2D& a, const Aabb2D& b);

}  // namespace lidarscope
