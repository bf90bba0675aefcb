#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lidarscope/range_image.hpp"

namespace lidarscope {

// Two classes x four orientation anchors x nine channels
// (objectness, 3 offsets, 2 orientation components, 3 sizes).
struct AnchorLayout {
  static constexpr int kNumClasses = 2;
  static constexpr int kOrientationAnchors = 4;
  static constexpr int kChannelsPerAnchor = 9;
  static constexpr int kNumAnchors = kNumClasses * kOrientationAnchors;
  static constexpr int kTotalChannels = kNumAnchors * kChannelsPerAnchor;

  static constexpr int objectness_channel(int anchor) { return anchor * kChannelsPerAnchor; }
  static constexpr int regression_channel(int anchor, int k) {
    return anchor * kChannelsPerAnchor + 1 + k;  // k in [0, 8)
  }
};

// Dense rows x cols x channels grid, row-major with channel-minor layout:
// index = (row * cols + col) * channels + channel. Stored at double
// precision; the on-disk format ("LPM1") holds IEEE-754 32-bit values.
struct PixelMap {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<double> values;

  static PixelMap zeros(int rows, int cols, int channels);

  size_t index(int row, int col, int ch) const {
    return (static_cast<size_t>(row) * cols + col) * channels + ch;
  }
  double at(int row, int col, int ch) const { return values[index(row, col, ch)]; }
  double& at(int row, int col, int ch) { return values[index(row, col, ch)]; }
};

using TargetMap = PixelMap;
using PredictionMap = PixelMap;

struct LossMasks {
  int rows = 0;
  int cols = 0;
  std::vector<uint8_t> classification;  // rows x cols
  std::vector<uint8_t> regression;      // rows x cols x kNumAnchors

  size_t pixel(int row, int col) const { return static_cast<size_t>(row) * cols + col; }
  size_t anchor_slot(int row, int col, int anchor) const {
    return pixel(row, col) * AnchorLayout::kNumAnchors + anchor;
  }
};

// Wrapped azimuth interval; contains(a) tests |wrap(a - center)| <= half_width.
struct AzimuthWindow {
  double center = 0.0;
  double half_width = kPi;  // default: full revolution

  bool contains(double azimuth) const;
  static AzimuthWindow full() { return {0.0, kPi}; }
  static AzimuthWindow front_half() { return {0.0, 0.5 * kPi}; }
};

// Horizontal field of view of the camera image expressed as lidar azimuths.
AzimuthWindow azimuth_window_from_calib(const CameraCalibration& calib);

// Projection of a single lidar point; nullopt when behind the camera.
std::optional<Vec2> project_point_to_image(const Point3& p, const CameraCalibration& calib);

// Rotation aligning the x-axis with the horizontal sensor-to-point ray.
// Throws DataError for points on the sensor axis (azimuth undefined).
Rot2 sight_frame(const Point3& point);

// Orientation bin from the yaw relative to the direction of sight; 90-degree
// bins with lower-inclusive boundaries at odd multiples of pi/4.
// Returns class_id * 4 + bin.
int anchor_index(double box_yaw, double azimuth, ObjectClass class_id);

// Eight regression values in fixed order: sight-frame offsets (x, y, z),
// orientation vector (cos, sin of relative yaw), sizes (width, length, height).
struct BoxEncoding {
  int anchor = 0;
  std::array<double, 8> values{};
};

BoxEncoding encode_box(const Point3& point, const Box3D& box);

// Inverse of encode_box for the point reconstructed from (row, col, range).
// Throws DataError on non-finite regression values.
Box3D decode_box(int row, int col, double range, int anchor,
                 const std::array<double, 8>& values, const SensorSpec& spec);

struct RasterizeResult {
  TargetMap targets;
  LossMasks masks;
  int degenerate_boxes_skipped = 0;
};

// Per-pixel targets: for every valid cell whose reconstructed point lies in a
// box, the box's anchor gets objectness 1 and the encode_box regression
// values; points in several boxes go to the box with the nearest center.
// The classification mask covers valid cells inside the azimuth window that
// do not project into a don't-care image region; the regression mask
// additionally requires an assigned box.
RasterizeResult rasterize_targets(const RangeImage& img, const std::vector<Box3D>& boxes,
                                  const std::vector<Aabb2D>& dontcare,
                                  const CameraCalibration& calib, const AzimuthWindow& window);

// Mean squared error over masked pixels and all objectness channels.
double classification_loss(const PredictionMap& pred, const TargetMap& target,
                           const LossMasks& masks);

// Per anchor: MSE over its masked pixels and the eight regression channels;
// anchors are summed.
double regression_loss(const PredictionMap& pred, const TargetMap& target, const LossMasks& masks);

// classification_loss + regression_loss.
double total_loss(const PredictionMap& pred, const TargetMap& target, const LossMasks& masks);

}  // namespace lidarscope
