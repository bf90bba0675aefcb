#pragma once

#include <string>
#include <vector>

#include "lidarscope/target_codec.hpp"

namespace lidarscope {

// Scene for the synthetic raycaster: hollow boxes above an optional ground
// plane, observed by a spinning sensor at the origin.
struct SyntheticScene {
  std::vector<Box3D> boxes;
  double ground_z = 0.0;
  bool has_ground = false;
};

// Scene description file: one box per line, "class x y z l w h yaw".
SyntheticScene read_scene(const std::string& path);
void write_scene(const SyntheticScene& scene, const std::string& path);

struct RaycastResult {
  RangeImage image;
  std::vector<int32_t> membership;  // per cell: box index, -1 = ground/none

  int32_t member(int row, int col) const {
    return membership[static_cast<size_t>(row) * image.cols + col];
  }
};

// Nearest slab-method intersection of each cell ray with any box surface or
// the ground plane. Boxes are hollow: rays hit faces, interior rays hit the
// far face.
RaycastResult raycast(const SyntheticScene& scene, const SensorSpec& spec);

// Exact targets emitted as a prediction (objectness 1 on hit pixels), using
// the raycaster's ground-truth membership instead of containment tests.
PredictionMap oracle_predict(const RaycastResult& cast, const std::vector<Box3D>& boxes);

}  // namespace lidarscope
