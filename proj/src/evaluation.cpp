#include "lidarscope/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace lidarscope {

KittiClass kitti_class_from_string(const std::string& name) {
  if (name == "Car") return KittiClass::kCar;
  if (name == "Van") return KittiClass::kVan;
  if (name == "Truck") return KittiClass::kTruck;
  if (name == "Pedestrian") return KittiClass::kPedestrian;
  if (name == "Person_sitting") return KittiClass::kPersonSitting;
  if (name == "Cyclist") return KittiClass::kCyclist;
  if (name == "Tram") return KittiClass::kTram;
  if (name == "Misc") return KittiClass::kMisc;
  if (name == "DontCare") return KittiClass::kDontCare;
  return KittiClass::kOther;
}

const char* to_string(KittiClass c) {
  switch (c) {
    case KittiClass::kCar: return "Car";
    case KittiClass::kVan: return "Van";
    case KittiClass::kTruck: return "Truck";
    case KittiClass::kPedestrian: return "Pedestrian";
    case KittiClass::kPersonSitting: return "Person_sitting";
    case KittiClass::kCyclist: return "Cyclist";
    case KittiClass::kTram: return "Tram";
    case KittiClass::kMisc: return "Misc";
    case KittiClass::kDontCare: return "DontCare";
    case KittiClass::kOther: return "Other";
  }
  return "Other";
}

EvalConfig car_eval_config(MatchSpace space) {
  EvalConfig c;
  c.space = space;
  c.primary = {KittiClass::kCar};
  c.neighbors = {KittiClass::kVan};
  c.detection_class = ObjectClass::kVehicle;
  c.iou_threshold = 0.7;
  return c;
}

EvalConfig pedestrian_eval_config(MatchSpace space) {
  EvalConfig c;
  c.space = space;
  c.primary = {KittiClass::kPedestrian};
  c.neighbors = {KittiClass::kPersonSitting};
  c.detection_class = ObjectClass::kVulnerableRoadUser;
  c.iou_threshold = 0.5;
  return c;
}

Difficulty assign_difficulty(const EvalLabel& label, const DifficultyRules& rules) {
  const double bbox_height = label.bbox.height();
  for (int d = 0; d < 3; ++d) {
    const DifficultyRule& rule = rules.levels[d];
    if (bbox_height >= rule.min_bbox_height && label.occlusion <= rule.max_occlusion &&
        label.truncation <= rule.max_truncation) {
      return static_cast<Difficulty>(d);
    }
  }
  return Difficulty::kIgnored;
}

namespace {

bool contains(const std::vector<KittiClass>& set, KittiClass c) {
  return std::find(set.begin(), set.end(), c) != set.end();
}

double match_iou(const Detection& det, const EvalLabel& label, const CameraCalibration& calib,
                 MatchSpace space) {
  switch (space) {
    case MatchSpace::kImage2D: {
      const auto projected = project_box_to_image(det.box, calib);
      if (!projected) return 0.0;
      return iou_2d(*projected, label.bbox);
    }
    case MatchSpace::kBev:
      return iou_bev(det.box, label.box);
    case MatchSpace::k3D:
      return iou_3d(det.box, label.box);
  }
  return 0.0;
}

}  // namespace

FrameMatchResult match_detections(const std::vector<Detection>& detections,
                                  const std::vector<EvalLabel>& labels,
                                  const CameraCalibration& calib, const EvalConfig& config,
                                  Difficulty level) {
  FrameMatchResult result;
  result.detections.resize(detections.size());

  // Partition labels: counted at this difficulty, or overlapping-is-ignored.
  std::vector<size_t> valid_gt;
  std::vector<size_t> ignored_gt;
  for (size_t i = 0; i < labels.size(); ++i) {
    const EvalLabel& l = labels[i];
    if (contains(config.primary, l.raw_class)) {
      const Difficulty d = assign_difficulty(l, config.difficulty);
      if (d != Difficulty::kIgnored && static_cast<int>(d) <= static_cast<int>(level)) {
        valid_gt.push_back(i);
      } else {
        ignored_gt.push_back(i);
      }
    } else if (contains(config.neighbors, l.raw_class)) {
      ignored_gt.push_back(i);
    }
  }
  result.valid_labels = static_cast<int>(valid_gt.size());

  std::vector<size_t> det_order;
  for (size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].box.class_id == config.detection_class) {
      det_order.push_back(i);
    } else {
      result.detections[i] = {detections[i].score, DetOutcome::kIgnored};  // other class family
    }
  }
  std::stable_sort(det_order.begin(), det_order.end(), [&](size_t a, size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<bool> gt_matched(labels.size(), false);
  for (size_t di : det_order) {
    const Detection& det = detections[di];
    double best_iou = 0.0;
    size_t best_gt = labels.size();
    for (size_t gi : valid_gt) {
      if (gt_matched[gi]) continue;
      const double iou = match_iou(det, labels[gi], calib, config.space);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = gi;
      }
    }
    if (best_gt < labels.size() && best_iou >= config.iou_threshold) {
      gt_matched[best_gt] = true;
      result.detections[di] = {det.score, DetOutcome::kTruePositive};
      ++result.found_labels;
      continue;
    }
    bool on_ignored = false;
    for (size_t gi : ignored_gt) {
      if (match_iou(det, labels[gi], calib, config.space) >= config.iou_threshold) {
        on_ignored = true;
        break;
      }
    }
    result.detections[di] = {det.score, on_ignored ? DetOutcome::kIgnored
                                                   : DetOutcome::kFalsePositive};
  }
  return result;
}

ApResult average_precision(const std::vector<ScoredOutcome>& outcomes, int total_positives,
                           int n_points) {
  if (n_points < 2) throw ConfigError("average_precision: need at least 2 recall points");
  ApResult result;
  if (total_positives <= 0) return result;

  std::vector<ScoredOutcome> counted;
  for (const ScoredOutcome& o : outcomes) {
    if (o.outcome != DetOutcome::kIgnored) counted.push_back(o);
  }
  std::stable_sort(counted.begin(), counted.end(),
                   [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.score > b.score; });

  int tp = 0;
  int fp = 0;
  for (const ScoredOutcome& o : counted) {
    if (o.outcome == DetOutcome::kTruePositive) ++tp;
    else ++fp;
    result.curve.push_back({static_cast<double>(tp) / total_positives,
                            static_cast<double>(tp) / (tp + fp)});
  }

  double ap = 0.0;
  for (int k = 0; k < n_points; ++k) {
    const double r = static_cast<double>(k) / (n_points - 1);
    double p_best = 0.0;
    for (const PrPoint& p : result.curve) {
      if (p.recall >= r - 1e-12) p_best = std::max(p_best, p.precision);
    }
    ap += p_best;
  }
  result.ap = ap / n_points;
  return result;
}

std::vector<DatasetApRow> evaluate_dataset(
    const std::vector<std::vector<Detection>>& detections_per_frame,
    const std::vector<std::vector<EvalLabel>>& labels_per_frame,
    const std::vector<CameraCalibration>& calib_per_frame, const EvalConfig& config) {
  const size_t n = detections_per_frame.size();
  if (labels_per_frame.size() != n || calib_per_frame.size() != n) {
    throw DataError("evaluate_dataset: per-frame input sizes differ");
  }
  std::vector<DatasetApRow> rows;
  for (Difficulty level : {Difficulty::kEasy, Difficulty::kModerate, Difficulty::kHard}) {
    std::vector<ScoredOutcome> all;
    int positives = 0;
    for (size_t f = 0; f < n; ++f) {
      const FrameMatchResult fr = match_detections(detections_per_frame[f], labels_per_frame[f],
                                                   calib_per_frame[f], config, level);
      all.insert(all.end(), fr.detections.begin(), fr.detections.end());
      positives += fr.valid_labels;
    }
    const ApResult ap = average_precision(all, positives, config.interpolation_points);
    rows.push_back({config.space, level, ap.ap, positives});
  }
  return rows;
}

std::vector<ReferenceBinReport> reference_vehicle_report(
    const std::map<int64_t, std::vector<Detection>>& detections_per_frame,
    const ReferenceTrack& track, double match_radius) {
  if (!(match_radius > 0.0)) throw ConfigError("reference_vehicle_report: radius must be positive");
  for (size_t i = 1; i < track.bin_upper_edges.size(); ++i) {
    if (!(track.bin_upper_edges[i] > track.bin_upper_edges[i - 1])) {
      throw ConfigError("reference_vehicle_report: bin edges must increase");
    }
  }
  const size_t n_bins = track.bin_upper_edges.size() + 1;

  struct Accum {
    int frames = 0;
    int detected = 0;
    double radial2 = 0.0, tangential2 = 0.0, vertical2 = 0.0;
    double orient2 = 0.0, length2 = 0.0, width2 = 0.0, height2 = 0.0;
  };
  std::vector<Accum> acc(n_bins);

  for (const ReferenceTrackEntry& entry : track.entries) {
    const double dist = std::hypot(entry.pose.center.x, entry.pose.center.y);
    size_t bin = 0;
    while (bin < track.bin_upper_edges.size() && dist >= track.bin_upper_edges[bin]) ++bin;
    ++acc[bin].frames;

    const auto it = detections_per_frame.find(entry.frame_id);
    if (it == detections_per_frame.end()) continue;
    const Detection* best = nullptr;
    double best_d = match_radius;
    for (const Detection& det : it->second) {
      const double d = std::hypot(det.box.center.x - entry.pose.center.x,
                                  det.box.center.y - entry.pose.center.y);
      if (d <= best_d) {
        best_d = d;
        best = &det;
      }
    }
    if (!best) continue;
    ++acc[bin].detected;

    // Sight-aligned decomposition at the ground-truth center.
    const double gd = std::hypot(entry.pose.center.x, entry.pose.center.y);
    Vec2 radial_dir{1.0, 0.0};
    if (gd > 0.0) radial_dir = {entry.pose.center.x / gd, entry.pose.center.y / gd};
    const Vec2 e_xy{best->box.center.x - entry.pose.center.x,
                    best->box.center.y - entry.pose.center.y};
    const double radial = dot(e_xy, radial_dir);
    const double tangential = cross(radial_dir, e_xy);
    const double vertical = best->box.center.z - entry.pose.center.z;
    const double orient = std::remainder(best->box.yaw - entry.pose.yaw, kPi);

    acc[bin].radial2 += radial * radial;
    acc[bin].tangential2 += tangential * tangential;
    acc[bin].vertical2 += vertical * vertical;
    acc[bin].orient2 += orient * orient;
    acc[bin].length2 += (best->box.length - entry.pose.length) * (best->box.length - entry.pose.length);
    acc[bin].width2 += (best->box.width - entry.pose.width) * (best->box.width - entry.pose.width);
    acc[bin].height2 += (best->box.height - entry.pose.height) * (best->box.height - entry.pose.height);
  }

  std::vector<ReferenceBinReport> report;
  for (size_t b = 0; b < n_bins; ++b) {
    if (acc[b].frames == 0) continue;  // empty bins are absent, not zero
    ReferenceBinReport r;
    std::ostringstream label;
    if (track.bin_upper_edges.empty()) {
      label << "all";
    } else if (b == 0) {
      label << "0-" << track.bin_upper_edges[0];
    } else if (b < track.bin_upper_edges.size()) {
      label << track.bin_upper_edges[b - 1] << "-" << track.bin_upper_edges[b];
    } else {
      label << ">" << track.bin_upper_edges.back();
    }
    r.label = label.str();
    r.frames = acc[b].frames;
    r.detected = acc[b].detected;
    r.detection_ratio = static_cast<double>(acc[b].detected) / acc[b].frames;
    if (acc[b].detected > 0) {
      const double n = acc[b].detected;
      r.rmse_radial = std::sqrt(acc[b].radial2 / n);
      r.rmse_tangential = std::sqrt(acc[b].tangential2 / n);
      r.rmse_vertical = std::sqrt(acc[b].vertical2 / n);
      r.rmse_orientation = std::sqrt(acc[b].orient2 / n);
      r.rmse_length = std::sqrt(acc[b].length2 / n);
      r.rmse_width = std::sqrt(acc[b].width2 / n);
      r.rmse_height = std::sqrt(acc[b].height2 / n);
    }
    report.push_back(std::move(r));
  }
  return report;
}

}  // namespace lidarscope
