#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lidarscope/evaluation.hpp"
#include "lidarscope/model_contract.hpp"
#include "lidarscope/range_image.hpp"

namespace lidarscope {

struct PointCloud {
  std::vector<Point3> points;
  int nan_dropped = 0;                 // points with non-finite coordinates
  size_t intensity_values_discarded = 0;  // reflectivity is parsed but unused
};

// KITTI velodyne .bin: little-endian float32 (x, y, z, intensity) quadruples.
PointCloud read_point_cloud(const std::string& path);

// KITTI calib file; uses projection P2 (left color camera).
CameraCalibration parse_calibration(const std::string& path);

struct FrameLabels {
  std::vector<EvalLabel> labels;  // every non-DontCare row, raw class kept
  std::vector<Aabb2D> dontcare;   // DontCare rows as image mask regions
};

// Internal class for a raw KITTI class, when one exists:
// {Car, Van} -> vehicle; {Pedestrian, Cyclist, Person_sitting} -> VRU.
std::optional<ObjectClass> map_kitti_class(KittiClass c);

// KITTI label_2 text. Camera-frame boxes land in the sensor frame with the
// internal yaw convention (CCW around +z, 0 = +x).
FrameLabels parse_labels(const std::string& path, const CameraCalibration& calib);

// Serialization of the supported label subset back to KITTI text (for
// round-trip checks and exporting synthetic datasets).
void write_labels(const FrameLabels& labels, const CameraCalibration& calib,
                  const std::string& path);

// Boxes of supported classes, for training-target rasterization.
std::vector<Box3D> training_boxes(const FrameLabels& labels);

struct FrameRecord {
  int64_t frame_id = 0;
  PointCloud cloud;
  FrameLabels labels;
  CameraCalibration calib;
};

struct DatasetSplit {
  std::vector<int64_t> training;
  std::vector<int64_t> validation;
  bool degraded = false;  // validation target unreachable without emptying training
};

// Whole sequences are assigned to validation (in order of first appearance in
// frame_ids) until its size first reaches the target; everything else trains.
DatasetSplit split_dataset(const std::vector<int64_t>& frame_ids,
                           const std::map<int64_t, std::string>& sequence_of_frame,
                           int target_validation);

// Sequence map file: "frame_id sequence_id" per line, '#' comments.
std::vector<std::pair<int64_t, std::string>> read_sequence_map(const std::string& path);

// --- interop binary formats (little-endian) ---

// "LRI1": u32 rows, u32 cols, f64 azimuth of column zero, rows x f64 channel
// elevations, rows*cols f32 ranges row-major with NaN encoding invalid cells.
void write_range_image(const RangeImage& img, const std::string& path);
RangeImage read_range_image(const std::string& path);

// "LPM1": u32 rows, u32 cols, u32 channels, then row-major channel-minor f32.
void write_pixel_map(const PixelMap& map, const std::string& path);
PixelMap read_pixel_map(const std::string& path);

// "LWT1": u32 layer count, then per layer u32 (out, in, kh, kw), the f32
// weights in out x in x kh x kw order, and f32 biases.
void write_model_weights(const ModelWeights& weights, const std::string& path);
ModelWeights read_model_weights(const std::string& path);

// Detection text: one per line,
// "frame_id class score x y z length width height yaw".
void write_detections(const std::map<int64_t, std::vector<Detection>>& per_frame,
                      const std::string& path);
std::map<int64_t, std::vector<Detection>> read_detections(const std::string& path);

// Reference track text: "frame_id x y z yaw length width height" per line.
ReferenceTrack read_reference_track(const std::string& path);

// Writes via a temp file in the same directory, then renames.
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace lidarscope
