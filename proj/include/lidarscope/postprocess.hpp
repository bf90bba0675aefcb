#pragma once

#include <vector>

#include "lidarscope/target_codec.hpp"

namespace lidarscope {

struct Detection {
  Box3D box;
  double score = 0.0;
  int row = 0;
  int col = 0;
  int anchor = 0;
};

enum class ColumnEdgeMode {
  kWrap,  // 360-degree sweeps: columns wrap circularly
  kClip,  // crops: window clipped at both column borders
};

struct PostprocessParams {
  double threshold = 0.05;
  int window_rows = 3;
  int window_cols = 5;
  ColumnEdgeMode edge_mode = ColumnEdgeMode::kWrap;
  double nms_cell_size = 0.2;  // meters
  bool conservative_cells = false;  // cover cells the footprint touches, not only centers
};

// Confidence factor min(|r|, 1/|r|) for an orientation vector; 0 at |r| = 0.
double orientation_confidence_factor(const Vec2& r);

// Each value replaced by the minimum over a window_rows x window_cols
// neighborhood. Rows are always clipped at the borders; columns follow
// `mode`. Input must be a single-channel map.
PixelMap neighborhood_min(const PixelMap& map, int window_rows, int window_cols,
                          ColumnEdgeMode mode);

// Thresholded decoding: per valid cell and anchor, score = min-filtered
// objectness times the orientation confidence factor; scores >= threshold
// are decoded into detections (pixel-major, anchor-minor order).
std::vector<Detection> extract_detections(const PredictionMap& pred, const RangeImage& img,
                                          const PostprocessParams& params = {});

// Greedy occupancy-grid suppression: detections in descending score order
// (ties by input order) claim the grid cells covered by their footprint; a
// detection touching an already-claimed cell is dropped. Output keeps score
// order.
std::vector<Detection> grid_nms(const std::vector<Detection>& detections, double cell_size = 0.2,
                                bool conservative_cells = false);

// Full chain: neighborhood minimum, confidence reweighting, thresholding,
// decoding, grid NMS.
std::vector<Detection> run_postprocess(const PredictionMap& pred, const RangeImage& img,
                                       const PostprocessParams& params = {});

}  // namespace lidarscope
