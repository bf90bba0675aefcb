#include "lidarscope/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace lidarscope {

double orientation_confidence_factor(const Vec2& r) {
  const double n = norm(r);
  if (n == 0.0) return 0.0;
  return std::min(n, 1.0 / n);
}

PixelMap neighborhood_min(const PixelMap& map, int window_rows, int window_cols,
                          ColumnEdgeMode mode) {
  if (map.channels != 1) throw DataError("neighborhood_min: expected a single-channel map");
  if (window_rows < 1 || window_cols < 1 || window_rows % 2 == 0 || window_cols % 2 == 0) {
    throw DataError("neighborhood_min: window extents must be odd and positive");
  }
  const int hr = window_rows / 2;
  const int hc = window_cols / 2;

  // The min filter is separable: rows pass (always clipped), then columns.
  PixelMap tmp = PixelMap::zeros(map.rows, map.cols, 1);
  for (int r = 0; r < map.rows; ++r) {
    const int r0 = std::max(0, r - hr);
    const int r1 = std::min(map.rows - 1, r + hr);
    for (int c = 0; c < map.cols; ++c) {
      double m = std::numeric_limits<double>::infinity();
      for (int rr = r0; rr <= r1; ++rr) m = std::min(m, map.at(rr, c, 0));
      tmp.at(r, c, 0) = m;
    }
  }
  PixelMap out = PixelMap::zeros(map.rows, map.cols, 1);
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      double m = std::numeric_limits<double>::infinity();
      if (mode == ColumnEdgeMode::kWrap) {
        for (int dc = -hc; dc <= hc; ++dc) {
          const int cc = ((c + dc) % map.cols + map.cols) % map.cols;
          m = std::min(m, tmp.at(r, cc, 0));
        }
      } else {
        const int c0 = std::max(0, c - hc);
        const int c1 = std::min(map.cols - 1, c + hc);
        for (int cc = c0; cc <= c1; ++cc) m = std::min(m, tmp.at(r, cc, 0));
      }
      out.at(r, c, 0) = m;
    }
  }
  return out;
}

std::vector<Detection> extract_detections(const PredictionMap& pred, const RangeImage& img,
                                          const PostprocessParams& params) {
  if (pred.rows != img.rows || pred.cols != img.cols) {
    throw DataError("extract_detections: prediction/image shape mismatch");
  }
  if (pred.channels != AnchorLayout::kTotalChannels) {
    throw DataError("extract_detections: unexpected channel count");
  }

  std::vector<PixelMap> filtered(AnchorLayout::kNumAnchors);
  for (int a = 0; a < AnchorLayout::kNumAnchors; ++a) {
    PixelMap obj = PixelMap::zeros(pred.rows, pred.cols, 1);
    const int ch = AnchorLayout::objectness_channel(a);
    for (int r = 0; r < pred.rows; ++r) {
      for (int c = 0; c < pred.cols; ++c) obj.at(r, c, 0) = pred.at(r, c, ch);
    }
    filtered[a] =
        neighborhood_min(obj, params.window_rows, params.window_cols, params.edge_mode);
  }

  std::vector<Detection> detections;
  for (int r = 0; r < pred.rows; ++r) {
    for (int c = 0; c < pred.cols; ++c) {
      if (!img.is_valid(r, c)) continue;
      for (int a = 0; a < AnchorLayout::kNumAnchors; ++a) {
        const Vec2 ori{pred.at(r, c, AnchorLayout::regression_channel(a, 3)),
                       pred.at(r, c, AnchorLayout::regression_channel(a, 4))};
        const double score = filtered[a].at(r, c, 0) * orientation_confidence_factor(ori);
        if (!(score >= params.threshold)) continue;
        std::array<double, 8> vals;
        for (int k = 0; k < 8; ++k) {
          vals[k] = pred.at(r, c, AnchorLayout::regression_channel(a, k));
        }
        Detection det;
        det.box = decode_box(r, c, img.range_at(r, c), a, vals, img.spec);
        det.score = score;
        det.row = r;
        det.col = c;
        det.anchor = a;
        detections.push_back(det);
      }
    }
  }
  return detections;
}

namespace {

struct FootprintRaster {
  // Inclusive cell index ranges of the footprint's bounding box.
  int64_t i0, i1, j0, j1;
  Box3D box;
};

FootprintRaster footprint_cells(const Box3D& box, double cell_size) {
  const auto corners = bev_corners(box);
  double min_x = corners[0].x, max_x = corners[0].x;
  double min_y = corners[0].y, max_y = corners[0].y;
  for (const Vec2& p : corners) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  FootprintRaster fr;
  fr.i0 = static_cast<int64_t>(std::floor(min_x / cell_size));
  fr.i1 = static_cast<int64_t>(std::floor(max_x / cell_size));
  fr.j0 = static_cast<int64_t>(std::floor(min_y / cell_size));
  fr.j1 = static_cast<int64_t>(std::floor(max_y / cell_size));
  fr.box = box;
  return fr;
}

// Separating-axis test between the box footprint and a cell square.
bool footprint_touches_cell(const Box3D& box, double x0, double y0, double s) {
  const auto corners = bev_corners(box);
  const Vec2 cell[4] = {{x0, y0}, {x0 + s, y0}, {x0 + s, y0 + s}, {x0, y0 + s}};
  auto separated = [](const Vec2& axis, const Vec2* a, const Vec2* b) {
    double a0 = std::numeric_limits<double>::infinity(), a1 = -a0;
    double b0 = a0, b1 = a1;
    for (int k = 0; k < 4; ++k) {
      const double pa = dot(axis, a[k]);
      const double pb = dot(axis, b[k]);
      a0 = std::min(a0, pa);
      a1 = std::max(a1, pa);
      b0 = std::min(b0, pb);
      b1 = std::max(b1, pb);
    }
    return a1 < b0 || b1 < a0;
  };
  const Vec2 box_pts[4] = {corners[0], corners[1], corners[2], corners[3]};
  const Vec2 axes[4] = {{1.0, 0.0},
                        {0.0, 1.0},
                        corners[1] - corners[0],
                        corners[3] - corners[0]};
  for (const Vec2& axis : axes) {
    if (separated(axis, box_pts, cell)) return false;
  }
  return true;
}

template <typename Occupancy>
std::vector<Detection> grid_nms_impl(const std::vector<Detection>& detections, double cell_size,
                                     bool conservative, Occupancy& occupied) {
  std::vector<size_t> order(detections.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<Detection> kept;
  std::vector<std::pair<int64_t, int64_t>> cells;
  for (size_t idx : order) {
    const Detection& det = detections[idx];
    const FootprintRaster fr = footprint_cells(det.box, cell_size);
    cells.clear();
    bool conflict = false;
    for (int64_t i = fr.i0; i <= fr.i1 && !conflict; ++i) {
      for (int64_t j = fr.j0; j <= fr.j1; ++j) {
        bool covered;
        if (conservative) {
          covered = footprint_touches_cell(det.box, static_cast<double>(i) * cell_size,
                                           static_cast<double>(j) * cell_size, cell_size);
        } else {
          covered = point_in_footprint(det.box, {(static_cast<double>(i) + 0.5) * cell_size,
                                                 (static_cast<double>(j) + 0.5) * cell_size});
        }
        if (!covered) continue;
        if (occupied.test(i, j)) {
          conflict = true;
          break;
        }
        cells.emplace_back(i, j);
      }
    }
    if (conflict) continue;
    for (const auto& [i, j] : cells) occupied.set(i, j);
    kept.push_back(det);
  }
  return kept;
}

struct DenseOccupancy {
  int64_t i0, j0;
  int64_t ni, nj;
  std::vector<uint8_t> cells;

  bool test(int64_t i, int64_t j) const {
    return cells[static_cast<size_t>(i - i0) * nj + (j - j0)] != 0;
  }
  void set(int64_t i, int64_t j) { cells[static_cast<size_t>(i - i0) * nj + (j - j0)] = 1; }
};

struct SparseOccupancy {
  std::unordered_map<uint64_t, uint8_t> cells;

  static uint64_t key(int64_t i, int64_t j) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(i)) << 32) |
           static_cast<uint64_t>(static_cast<uint32_t>(j));
  }
  bool test(int64_t i, int64_t j) const { return cells.count(key(i, j)) != 0; }
  void set(int64_t i, int64_t j) { cells.emplace(key(i, j), 1); }
};

}  // namespace

std::vector<Detection> grid_nms(const std::vector<Detection>& detections, double cell_size,
                                bool conservative_cells) {
  if (!(cell_size > 0.0)) throw DataError("grid_nms: cell_size must be positive");
  for (const Detection& d : detections) {
    if (!std::isfinite(d.box.center.x) || !std::isfinite(d.box.center.y) ||
        !std::isfinite(d.box.length) || !std::isfinite(d.box.width) ||
        !std::isfinite(d.box.yaw) || !std::isfinite(d.score)) {
      throw DataError("grid_nms: non-finite detection");
    }
  }
  if (detections.empty()) return {};

  int64_t i0 = std::numeric_limits<int64_t>::max(), i1 = std::numeric_limits<int64_t>::min();
  int64_t j0 = i0, j1 = i1;
  for (const Detection& d : detections) {
    const FootprintRaster fr = footprint_cells(d.box, cell_size);
    i0 = std::min(i0, fr.i0);
    i1 = std::max(i1, fr.i1);
    j0 = std::min(j0, fr.j0);
    j1 = std::max(j1, fr.j1);
  }
  const int64_t ni = i1 - i0 + 1;
  const int64_t nj = j1 - j0 + 1;
  if (ni > 0 && nj > 0 && ni * nj <= int64_t{64} * 1024 * 1024) {
    DenseOccupancy occ{i0, j0, ni, nj, std::vector<uint8_t>(static_cast<size_t>(ni * nj), 0)};
    return grid_nms_impl(detections, cell_size, conservative_cells, occ);
  }
  SparseOccupancy occ;
  return grid_nms_impl(detections, cell_size, conservative_cells, occ);
}

std::vector<Detection> run_postprocess(const PredictionMap& pred, const RangeImage& img,
                                       const PostprocessParams& params) {
  const std::vector<Detection> raw = extract_detections(pred, img, params);
  return grid_nms(raw, params.nms_cell_size, params.conservative_cells);
}

}  // namespace lidarscope
