#include "lidarscope/range_image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lidarscope {

namespace {

constexpr double kInvalidRange = std::numeric_limits<double>::quiet_NaN();

double min_adjacent_gap(const std::vector<double>& elevations) {
  double g = std::numeric_limits<double>::infinity();
  for (size_t i = 1; i < elevations.size(); ++i) {
    g = std::min(g, elevations[i - 1] - elevations[i]);
  }
  return g;
}

// Nearest channel by elevation; returns -1 when farther than `tol` from all.
int nearest_channel(const std::vector<double>& elevations, double elev, double tol) {
  // elevations are strictly decreasing
  const auto it = std::lower_bound(elevations.begin(), elevations.end(), elev,
                                   [](double channel, double value) { return channel > value; });
  int best = -1;
  double best_err = tol;
  const int hi = static_cast<int>(it - elevations.begin());
  for (int r : {hi - 1, hi}) {
    if (r < 0 || r >= static_cast<int>(elevations.size())) continue;
    const double err = std::abs(elevations[r] - elev);
    if (err <= best_err) {
      best_err = err;
      best = r;
    }
  }
  return best;
}

}  // namespace

void SensorSpec::validate() const {
  if (columns_per_revolution <= 0) throw DataError("SensorSpec: columns_per_revolution must be > 0");
  if (channel_elevations.empty()) throw DataError("SensorSpec: no channels");
  for (size_t i = 1; i < channel_elevations.size(); ++i) {
    if (!(channel_elevations[i] < channel_elevations[i - 1])) {
      throw DataError("SensorSpec: channel elevations not strictly decreasing");
    }
  }
}

RangeImage RangeImage::empty(const SensorSpec& spec) {
  spec.validate();
  RangeImage img;
  img.rows = spec.rows();
  img.cols = spec.columns_per_revolution;
  const size_t n = static_cast<size_t>(img.rows) * img.cols;
  img.range.assign(n, kInvalidRange);
  img.valid.assign(n, 0);
  img.point_index.assign(n, -1);
  img.spec = spec;
  return img;
}

int azimuth_to_column(double azimuth, const SensorSpec& spec) {
  const double rel = wrap_two_pi(azimuth - spec.azimuth_of_column_zero);
  int col = static_cast<int>(std::floor(rel / (2.0 * kPi) * spec.columns_per_revolution));
  if (col >= spec.columns_per_revolution) col = spec.columns_per_revolution - 1;
  if (col < 0) col = 0;
  return col;
}

double column_center_azimuth(int col, const SensorSpec& spec) {
  const double step = 2.0 * kPi / spec.columns_per_revolution;
  return wrap_angle(spec.azimuth_of_column_zero + (col + 0.5) * step);
}

Point3 cell_direction(const SensorSpec& spec, int row, int col) {
  const double elev = spec.channel_elevations[row];
  const double az = column_center_azimuth(col, spec);
  const double ce = std::cos(elev);
  return {ce * std::cos(az), ce * std::sin(az), std::sin(elev)};
}

Point3 cell_point(const SensorSpec& spec, int row, int col, double range) {
  return range * cell_direction(spec, row, col);
}

RangeImage build_range_image(const std::vector<Point3>& points, const SensorSpec& spec,
                             BuildStats* stats) {
  RangeImage img = RangeImage::empty(spec);
  const double tol = 0.5 * min_adjacent_gap(spec.channel_elevations);
  BuildStats local;
  for (size_t i = 0; i < points.size(); ++i) {
    const Point3& p = points[i];
    const double horiz = std::hypot(p.x, p.y);
    const double elev = std::atan2(p.z, horiz);
    const int row = nearest_channel(spec.channel_elevations, elev, tol);
    if (row < 0) {
      ++local.dropped;
      continue;
    }
    const int col = azimuth_to_column(std::atan2(p.y, p.x), spec);
    const double r = norm(p);
    const size_t c = img.cell(row, col);
    if (img.valid[c] && img.range[c] <= r) {
      ++local.shadowed;
      continue;
    }
    if (img.valid[c]) ++local.shadowed;  // previous occupant loses
    else ++local.kept;
    img.range[c] = r;
    img.valid[c] = 1;
    img.point_index[c] = static_cast<int32_t>(i);
  }
  if (stats) *stats = local;
  return img;
}

ChannelReconstruction reconstruct_channels(const std::vector<Point3>& points, int expected_rows) {
  if (expected_rows <= 0) throw DataError("reconstruct_channels: expected_rows must be > 0");
  ChannelReconstruction out;
  out.row_of_point.assign(points.size(), 0);
  out.elevations.assign(expected_rows, 0.0);

  const size_t n = points.size();
  if (n == 0) {
    out.degraded = true;
    out.populated_rows = 0;
    for (int r = 0; r < expected_rows; ++r) out.elevations[r] = -1e-3 * r;
    return out;
  }
  std::vector<double> elev(n);
  for (size_t i = 0; i < n; ++i) {
    elev[i] = std::atan2(points[i].z, std::hypot(points[i].x, points[i].y));
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return elev[a] > elev[b]; });  // top first

  // Count distinct elevation values (ties within 1e-12 rad collapse).
  int distinct = n > 0 ? 1 : 0;
  for (size_t k = 1; k < n; ++k) {
    if (elev[order[k - 1]] - elev[order[k]] > 1e-12) ++distinct;
  }

  if (distinct < expected_rows) {
    // Degraded: assign each distinct value its own row from the top and pad
    // the remaining elevations by extrapolating the mean gap.
    out.degraded = true;
    out.populated_rows = distinct;
    int row = 0;
    for (size_t k = 0; k < n; ++k) {
      if (k > 0 && elev[order[k - 1]] - elev[order[k]] > 1e-12) ++row;
      out.row_of_point[order[k]] = row;
      out.elevations[row] = elev[order[k]];
    }
    double gap = 1e-3;
    if (distinct > 1) gap = (out.elevations[0] - out.elevations[distinct - 1]) / (distinct - 1);
    if (!(gap > 0.0)) gap = 1e-3;
    for (int r = distinct; r < expected_rows; ++r) {
      out.elevations[r] = out.elevations[r - 1] - gap;
    }
    return out;
  }

  // Cluster boundaries at the (expected_rows - 1) largest gaps in the sorted
  // sequence; ties broken by position for determinism.
  std::vector<std::pair<double, size_t>> gaps;  // (gap, boundary after sorted index)
  gaps.reserve(n - 1);
  for (size_t k = 1; k < n; ++k) {
    gaps.emplace_back(elev[order[k - 1]] - elev[order[k]], k);
  }
  std::stable_sort(gaps.begin(), gaps.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<size_t> cuts;
  for (int k = 0; k < expected_rows - 1; ++k) cuts.push_back(gaps[k].second);
  std::sort(cuts.begin(), cuts.end());

  // Initial centers: cluster means.
  std::vector<double> centers(expected_rows, 0.0);
  {
    size_t start = 0;
    for (int r = 0; r < expected_rows; ++r) {
      const size_t end = r < expected_rows - 1 ? cuts[r] : n;
      double sum = 0.0;
      for (size_t k = start; k < end; ++k) sum += elev[order[k]];
      centers[r] = sum / static_cast<double>(end - start);
      start = end;
    }
  }

  // 1D k-means refinement. Centers stay sorted (descending) because the data
  // is sorted and assignments are contiguous.
  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 10; ++iter) {
    bool changed = false;
    size_t k = 0;
    for (int r = 0; r < expected_rows; ++r) {
      // Points belong to center r while it is the nearest one.
      while (k < n) {
        const double e = elev[order[k]];
        if (r + 1 < expected_rows &&
            std::abs(e - centers[r + 1]) < std::abs(e - centers[r])) {
          break;
        }
        if (assign[order[k]] != r) {
          assign[order[k]] = r;
          changed = true;
        }
        ++k;
      }
    }
    std::vector<double> sum(expected_rows, 0.0);
    std::vector<int> cnt(expected_rows, 0);
    for (size_t i = 0; i < n; ++i) {
      sum[assign[i]] += elev[i];
      ++cnt[assign[i]];
    }
    bool empty_cluster = false;
    for (int r = 0; r < expected_rows; ++r) {
      if (cnt[r] == 0) {
        empty_cluster = true;
        continue;
      }
      centers[r] = sum[r] / cnt[r];
    }
    if (empty_cluster) out.degraded = true;
    if (!changed && iter > 0) break;
  }

  out.row_of_point = assign;
  out.elevations = centers;
  int populated = 0;
  {
    std::vector<int> cnt(expected_rows, 0);
    for (int r : assign) ++cnt[r];
    for (int c : cnt) populated += c > 0 ? 1 : 0;
  }
  out.populated_rows = populated;
  for (int r = 1; r < expected_rows; ++r) {
    if (!(out.elevations[r] < out.elevations[r - 1])) {
      out.degraded = true;
      out.elevations[r] = out.elevations[r - 1] - 1e-9;
    }
  }
  return out;
}

NetworkInput scale_for_network(const RangeImage& img, double fill_value) {
  NetworkInput in;
  in.rows = img.rows;
  in.cols = img.cols;
  in.values.resize(img.range.size());
  for (size_t i = 0; i < img.range.size(); ++i) {
    in.values[i] = img.valid[i] ? 0.01 * img.range[i] : fill_value;
  }
  return in;
}

}  // namespace lidarscope
