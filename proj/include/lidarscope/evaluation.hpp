#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lidarscope/postprocess.hpp"

namespace lidarscope {

enum class KittiClass {
  kCar,
  kVan,
  kTruck,
  kPedestrian,
  kPersonSitting,
  kCyclist,
  kTram,
  kMisc,
  kDontCare,
  kOther,
};

KittiClass kitti_class_from_string(const std::string& name);
const char* to_string(KittiClass c);

enum class Difficulty { kEasy = 0, kModerate = 1, kHard = 2, kIgnored = 3 };

struct DifficultyRule {
  double min_bbox_height = 0.0;  // pixels
  int max_occlusion = 0;
  double max_truncation = 0.0;
};

// External-convention defaults matching the public KITTI devkit.
struct DifficultyRules {
  std::array<DifficultyRule, 3> levels{{{40.0, 0, 0.15}, {25.0, 1, 0.30}, {25.0, 2, 0.50}}};
};

struct EvalLabel {
  KittiClass raw_class = KittiClass::kOther;
  Box3D box;      // sensor frame
  Aabb2D bbox;    // image pixels
  int occlusion = 0;
  double truncation = 0.0;
};

enum class MatchSpace { kImage2D, kBev, k3D };

struct EvalConfig {
  MatchSpace space = MatchSpace::kBev;
  std::vector<KittiClass> primary{KittiClass::kCar};
  std::vector<KittiClass> neighbors{KittiClass::kVan};  // neither TP nor FP
  ObjectClass detection_class = ObjectClass::kVehicle;
  double iou_threshold = 0.7;
  int interpolation_points = 11;
  DifficultyRules difficulty;
};

// Default class configurations of the shipped evaluation: car with van
// neighbors at IoU 0.7, pedestrian with sitting-person neighbors at 0.5.
EvalConfig car_eval_config(MatchSpace space);
EvalConfig pedestrian_eval_config(MatchSpace space);

// The least strict difficulty whose thresholds the label satisfies
// (inclusive comparisons); kIgnored when none do.
Difficulty assign_difficulty(const EvalLabel& label, const DifficultyRules& rules);

enum class DetOutcome { kTruePositive, kFalsePositive, kIgnored };

struct ScoredOutcome {
  double score = 0.0;
  DetOutcome outcome = DetOutcome::kFalsePositive;
};

struct FrameMatchResult {
  std::vector<ScoredOutcome> detections;  // one entry per input detection
  int valid_labels = 0;                   // labels counted by recall
  int found_labels = 0;
};

// Greedy single-frame matching at difficulty `level`: detections in
// descending score order each claim the unmatched in-class label of highest
// IoU >= threshold. Detections overlapping neighbor-class or
// harder-than-level labels are ignored.
FrameMatchResult match_detections(const std::vector<Detection>& detections,
                                  const std::vector<EvalLabel>& labels,
                                  const CameraCalibration& calib, const EvalConfig& config,
                                  Difficulty level);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct ApResult {
  double ap = 0.0;
  std::vector<PrPoint> curve;  // cumulative points in descending-score order
};

// Interpolated average precision: mean of the max-precision-to-the-right
// envelope sampled at n_points equally spaced recalls in [0, 1].
ApResult average_precision(const std::vector<ScoredOutcome>& outcomes, int total_positives,
                           int n_points = 11);

struct DatasetApRow {
  MatchSpace space;
  Difficulty level;
  double ap = 0.0;
  int valid_labels = 0;
};

// Aggregates per-frame matches over a dataset for the three difficulty bins.
std::vector<DatasetApRow> evaluate_dataset(
    const std::vector<std::vector<Detection>>& detections_per_frame,
    const std::vector<std::vector<EvalLabel>>& labels_per_frame,
    const std::vector<CameraCalibration>& calib_per_frame, const EvalConfig& config);

struct ReferenceTrackEntry {
  int64_t frame_id = 0;
  Box3D pose;  // ground-truth box of the reference object
};

struct ReferenceTrack {
  std::vector<ReferenceTrackEntry> entries;
  std::vector<double> bin_upper_edges{20.0, 40.0};  // last bin is open-ended
};

struct ReferenceBinReport {
  std::string label;        // e.g. "0-20"
  int frames = 0;
  int detected = 0;
  double detection_ratio = 0.0;
  double rmse_radial = 0.0;
  double rmse_tangential = 0.0;
  double rmse_vertical = 0.0;
  double rmse_orientation = 0.0;  // radians
  double rmse_length = 0.0;
  double rmse_width = 0.0;
  double rmse_height = 0.0;
};

// Per distance bin: the detection nearest the reference pose (BEV center
// distance) within match_radius counts as detected; position errors are
// decomposed in the sight-aligned frame at the ground-truth center and the
// orientation error is taken nearest modulo 180 degrees. Bins without frames
// are omitted.
std::vector<ReferenceBinReport> reference_vehicle_report(
    const std::map<int64_t, std::vector<Detection>>& detections_per_frame,
    const ReferenceTrack& track, double match_radius = 2.5);

}  // namespace lidarscope
