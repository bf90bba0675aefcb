#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lidarscope/geometry.hpp"

namespace lidarscope {

// Spinning-sensor geometry: one row per channel (top row first), columns are
// azimuth steps of one revolution.
struct SensorSpec {
  std::string name;
  int columns_per_revolution = 0;
  std::vector<double> channel_elevations;  // radians, strictly decreasing
  double azimuth_of_column_zero = 0.0;     // radians

  int rows() const { return static_cast<int>(channel_elevations.size()); }
  void validate() const;
};

// Organized grid of range measurements. Invalid cells carry no measurement
// and are ignored everywhere downstream. Stored at double precision; the
// on-disk format ("LRI1") holds IEEE-754 32-bit ranges.
struct RangeImage {
  int rows = 0;
  int cols = 0;
  std::vector<double> range;       // meters, row-major; NaN on invalid cells
  std::vector<uint8_t> valid;      // row-major
  std::vector<int32_t> point_index;  // index into source cloud, -1 if none
  SensorSpec spec;

  static RangeImage empty(const SensorSpec& spec);

  size_t cell(int row, int col) const { return static_cast<size_t>(row) * cols + col; }
  bool is_valid(int row, int col) const { return valid[cell(row, col)] != 0; }
  double range_at(int row, int col) const { return range[cell(row, col)]; }
};

// Network input plane: 0.01 * range on valid cells, fill value elsewhere.
struct NetworkInput {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major
};

struct BuildStats {
  int kept = 0;      // points written to cells
  int shadowed = 0;  // collision losers (a nearer point holds the cell)
  int dropped = 0;   // elevation outside every channel's tolerance
};

// Column index for an azimuth: floor(((az - az0) mod 2pi) / 2pi * cols).
int azimuth_to_column(double azimuth, const SensorSpec& spec);

// Azimuth at the center of a column.
double column_center_azimuth(int col, const SensorSpec& spec);

// Unit direction of a cell (row elevation, column-center azimuth).
Point3 cell_direction(const SensorSpec& spec, int row, int col);

// 3D point reconstructed from a cell and its Euclidean range.
Point3 cell_point(const SensorSpec& spec, int row, int col, double range);

// Assigns each point to (nearest-elevation row, azimuth column). On cell
// collisions the nearer point wins. Points whose elevation is farther than
// half the minimum channel gap from every channel are dropped and counted.
RangeImage build_range_image(const std::vector<Point3>& points, const SensorSpec& spec,
                             BuildStats* stats = nullptr);

// Result of estimating the channel structure of an unorganized cloud.
struct ChannelReconstruction {
  std::vector<int> row_of_point;    // row in [0, expected_rows) per input point
  std::vector<double> elevations;   // radians, strictly decreasing, size expected_rows
  bool degraded = false;            // fewer distinct elevation clusters than rows
  int populated_rows = 0;
};

// Recovers per-point channel assignment from elevation angles: sort, split at
// the largest gaps into expected_rows clusters, refine with 1D k-means
// (at most 10 iterations). Deterministic.
ChannelReconstruction reconstruct_channels(const std::vector<Point3>& points, int expected_rows);

// 0.01 * range on valid cells; invalid cells take `fill_value`.
NetworkInput scale_for_network(const RangeImage& img, double fill_value = 0.0);

}  // namespace lidarscope
