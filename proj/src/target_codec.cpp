#include "lidarscope/target_codec.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace lidarscope {

PixelMap PixelMap::zeros(int rows, int cols, int channels) {
  PixelMap m;
  m.rows = rows;
  m.cols = cols;
  m.channels = channels;
  m.values.assign(static_cast<size_t>(rows) * cols * channels, 0.0);
  return m;
}

bool AzimuthWindow::contains(double azimuth) const {
  return std::abs(wrap_angle(azimuth - center)) <= half_width;
}

std::optional<Vec2> project_point_to_image(const Point3& p, const CameraCalibration& calib) {
  const auto& t = calib.lidar_to_camera;
  const double cx = t[0][0] * p.x + t[0][1] * p.y + t[0][2] * p.z + t[0][3];
  const double cy = t[1][0] * p.x + t[1][1] * p.y + t[1][2] * p.z + t[1][3];
  const double cz = t[2][0] * p.x + t[2][1] * p.y + t[2][2] * p.z + t[2][3];
  const auto& r = calib.rectification;
  const double rx = r[0][0] * cx + r[0][1] * cy + r[0][2] * cz;
  const double ry = r[1][0] * cx + r[1][1] * cy + r[1][2] * cz;
  const double rz = r[2][0] * cx + r[2][1] * cy + r[2][2] * cz;
  if (rz <= 1e-3) return std::nullopt;
  const auto& m = calib.projection;
  const double u = m[0][0] * rx + m[0][1] * ry + m[0][2] * rz + m[0][3];
  const double v = m[1][0] * rx + m[1][1] * ry + m[1][2] * rz + m[1][3];
  const double w = m[2][0] * rx + m[2][1] * ry + m[2][2] * rz + m[2][3];
  return Vec2{u / w, v / w};
}

AzimuthWindow azimuth_window_from_calib(const CameraCalibration& calib) {
  const double fx = calib.projection[0][0];
  const double cu = calib.projection[0][2];
  if (!(fx > 0.0)) throw DataError("azimuth_window_from_calib: invalid focal length");

  // Direction of an image column in lidar coordinates.
  auto column_azimuth = [&](double u) {
    const double dx_rect = (u - cu) / fx;
    // rect -> camera (rectification is orthonormal; use the transpose)
    const auto& r = calib.rectification;
    const double cxd = r[0][0] * dx_rect + r[1][0] * 0.0 + r[2][0] * 1.0;
    const double cyd = r[0][1] * dx_rect + r[1][1] * 0.0 + r[2][1] * 1.0;
    const double czd = r[0][2] * dx_rect + r[1][2] * 0.0 + r[2][2] * 1.0;
    // camera -> lidar (rotation part transpose)
    const auto& t = calib.lidar_to_camera;
    const double lx = t[0][0] * cxd + t[1][0] * cyd + t[2][0] * czd;
    const double ly = t[0][1] * cxd + t[1][1] * cyd + t[2][1] * czd;
    return std::atan2(ly, lx);
  };

  const double az_left = column_azimuth(0.0);
  const double az_right = column_azimuth(static_cast<double>(calib.image_width));
  const double span = wrap_two_pi(az_left - az_right);  // left edge is at larger azimuth
  AzimuthWindow w;
  w.half_width = 0.5 * span;
  w.center = wrap_angle(az_right + w.half_width);
  return w;
}

Rot2 sight_frame(const Point3& point) {
  if (point.x == 0.0 && point.y == 0.0) {
    throw DataError("sight_frame: point on the sensor axis has no azimuth");
  }
  return Rot2::from_angle(std::atan2(point.y, point.x));
}

int anchor_index(double box_yaw, double azimuth, ObjectClass class_id) {
  const double phi = box_yaw - azimuth;
  const int bin = static_cast<int>(std::floor(wrap_two_pi(phi + 0.25 * kPi) / (0.5 * kPi))) % 4;
  return static_cast<int>(class_id) * AnchorLayout::kOrientationAnchors + bin;
}

BoxEncoding encode_box(const Point3& point, const Box3D& box) {
  const Rot2 frame = sight_frame(point);
  const double azimuth = std::atan2(point.y, point.x);
  const Vec2 offset =
      frame.apply_inverse({box.center.x - point.x, box.center.y - point.y});
  const double phi = box.yaw - azimuth;

  BoxEncoding enc;
  enc.anchor = anchor_index(box.yaw, azimuth, box.class_id);
  enc.values = {offset.x,          offset.y,  box.center.z - point.z, std::cos(phi),
                std::sin(phi),     box.width, box.length,             box.height};
  return enc;
}

Box3D decode_box(int row, int col, double range, int anchor,
                 const std::array<double, 8>& values, const SensorSpec& spec) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("decode_box: non-finite regression value");
  }
  const Point3 point = cell_point(spec, row, col, range);
  const double azimuth = std::atan2(point.y, point.x);
  const Rot2 frame = Rot2::from_angle(azimuth);
  const Vec2 d = frame.apply({values[0], values[1]});

  Box3D box;
  box.center = {point.x + d.x, point.y + d.y, point.z + values[2]};
  box.yaw = wrap_angle(azimuth + std::atan2(values[4], values[3]));
  box.width = values[5];
  box.length = values[6];
  box.height = values[7];
  box.class_id = static_cast<ObjectClass>(anchor / AnchorLayout::kOrientationAnchors);
  return box;
}

RasterizeResult rasterize_targets(const RangeImage& img, const std::vector<Box3D>& boxes,
                                  const std::vector<Aabb2D>& dontcare,
                                  const CameraCalibration& calib, const AzimuthWindow& window) {
  RasterizeResult out;
  out.targets = PixelMap::zeros(img.rows, img.cols, AnchorLayout::kTotalChannels);
  out.masks.rows = img.rows;
  out.masks.cols = img.cols;
  out.masks.classification.assign(static_cast<size_t>(img.rows) * img.cols, 0);
  out.masks.regression.assign(
      static_cast<size_t>(img.rows) * img.cols * AnchorLayout::kNumAnchors, 0);

  std::vector<const Box3D*> usable;
  for (const Box3D& b : boxes) {
    if (b.length > 0.0 && b.width > 0.0 && b.height > 0.0) {
      usable.push_back(&b);
    } else {
      ++out.degenerate_boxes_skipped;
    }
  }

  // Surface hits sit exactly on box faces; a small slack keeps them inside.
  constexpr double kContainTol = 1e-9;

  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      if (!img.is_valid(r, c)) continue;
      const Point3 p = cell_point(img.spec, r, c, img.range_at(r, c));

      bool cls = window.contains(column_center_azimuth(c, img.spec));
      if (cls && !dontcare.empty()) {
        if (const auto uv = project_point_to_image(p, calib)) {
          for (const Aabb2D& region : dontcare) {
            if (uv->x >= region.min_u && uv->x <= region.max_u && uv->y >= region.min_v &&
                uv->y <= region.max_v) {
              cls = false;
              break;
            }
          }
        }
      }
      out.masks.classification[out.masks.pixel(r, c)] = cls ? 1 : 0;

      const Box3D* owner = nullptr;
      double owner_dist = std::numeric_limits<double>::infinity();
      for (const Box3D* b : usable) {
        if (!point_in_box(*b, p, kContainTol)) continue;
        const double d = norm(b->center - p);
        if (d < owner_dist) {
          owner_dist = d;
          owner = b;
        }
      }
      if (!owner) continue;

      const BoxEncoding enc = encode_box(p, *owner);
      out.targets.at(r, c, AnchorLayout::objectness_channel(enc.anchor)) = 1.0;
      for (int k = 0; k < 8; ++k) {
        out.targets.at(r, c, AnchorLayout::regression_channel(enc.anchor, k)) = enc.values[k];
      }
      if (cls) out.masks.regression[out.masks.anchor_slot(r, c, enc.anchor)] = 1;
    }
  }
  return out;
}

namespace {

void check_same_shape(const PixelMap& a, const PixelMap& b, const LossMasks& masks) {
  if (a.rows != b.rows || a.cols != b.cols || a.channels != b.channels) {
    throw DataError("loss: prediction/target shape mismatch");
  }
  if (a.channels != AnchorLayout::kTotalChannels) {
    throw DataError("loss: expected " + std::to_string(AnchorLayout::kTotalChannels) +
                    " channels");
  }
  if (masks.rows != a.rows || masks.cols != a.cols) {
    throw DataError("loss: mask shape mismatch");
  }
}

}  // namespace

double classification_loss(const PredictionMap& pred, const TargetMap& target,
                           const LossMasks& masks) {
  check_same_shape(pred, target, masks);
  double sum = 0.0;
  size_t count = 0;
  for (int r = 0; r < pred.rows; ++r) {
    for (int c = 0; c < pred.cols; ++c) {
      if (!masks.classification[masks.pixel(r, c)]) continue;
      for (int a = 0; a < AnchorLayout::kNumAnchors; ++a) {
        const int ch = AnchorLayout::objectness_channel(a);
        const double d = pred.at(r, c, ch) - target.at(r, c, ch);
        sum += d * d;
        ++count;
      }
    }
  }
  if (count == 0) {
    std::clog << "classification_loss: empty mask, loss undefined, returning 0\n";
    return 0.0;
  }
  return sum / static_cast<double>(count);
}

double regression_loss(const PredictionMap& pred, const TargetMap& target,
                       const LossMasks& masks) {
  check_same_shape(pred, target, masks);
  double total = 0.0;
  for (int a = 0; a < AnchorLayout::kNumAnchors; ++a) {
    double sum = 0.0;
    size_t count = 0;
    for (int r = 0; r < pred.rows; ++r) {
      for (int c = 0; c < pred.cols; ++c) {
        if (!masks.regression[masks.anchor_slot(r, c, a)]) continue;
        for (int k = 0; k < 8; ++k) {
          const int ch = AnchorLayout::regression_channel(a, k);
          const double d = pred.at(r, c, ch) - target.at(r, c, ch);
          sum += d * d;
          count += 1;
        }
      }
    }
    if (count > 0) total += sum / static_cast<double>(count);
  }
  return total;
}

double total_loss(const PredictionMap& pred, const TargetMap& target, const LossMasks& masks) {
  return classification_loss(pred, target, masks) + regression_loss(pred, target, masks);
}

}  // namespace lidarscope
