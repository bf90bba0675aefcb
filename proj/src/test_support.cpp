#include "lidarscope/test_support.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "lidarscope/dataset_io.hpp"

namespace lidarscope {

namespace {

// Distance along the ray (unit direction, origin at the sensor) to the box
// surface; +inf when the ray misses.
double ray_box_distance(const Box3D& box, const Point3& dir) {
  const Rot2 rot = Rot2::from_angle(box.yaw);
  const Vec2 o_xy = rot.apply_inverse({-box.center.x, -box.center.y});
  const Vec2 d_xy = rot.apply_inverse({dir.x, dir.y});
  const double origin[3] = {o_xy.x, o_xy.y, -box.center.z};
  const double d[3] = {d_xy.x, d_xy.y, dir.z};
  const double half[3] = {0.5 * box.length, 0.5 * box.width, 0.5 * box.height};

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) {
      if (std::abs(origin[axis]) > half[axis]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (-half[axis] - origin[axis]) / d[axis];
    double t1 = (half[axis] - origin[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
  }
  if (tmax < tmin || tmax <= 0.0) return std::numeric_limits<double>::infinity();
  return tmin > 0.0 ? tmin : tmax;
}

}  // namespace

SyntheticScene read_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene: " + path);
  SyntheticScene scene;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string cls;
    if (!(ss >> cls)) continue;
    if (cls == "ground") {
      if (!(ss >> scene.ground_z)) {
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed ground line");
      }
      scene.has_ground = true;
      continue;
    }
    Box3D box;
    double x, y, z;
    if (!(ss >> x >> y >> z >> box.length >> box.width >> box.height >> box.yaw)) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed box line");
    }
    box.center = {x, y, z};
    if (cls == "vehicle") {
      box.class_id = ObjectClass::kVehicle;
    } else if (cls == "vulnerable_road_user") {
      box.class_id = ObjectClass::kVulnerableRoadUser;
    } else {
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown class: " + cls);
    }
    scene.boxes.push_back(box);
  }
  return scene;
}

void write_scene(const SyntheticScene& scene, const std::string& path) {
  std::ostringstream ss;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  if (scene.has_ground) ss << "ground " << num(scene.ground_z) << '\n';
  for (const Box3D& b : scene.boxes) {
    ss << (b.class_id == ObjectClass::kVehicle ? "vehicle" : "vulnerable_road_user") << ' '
       << num(b.center.x) << ' ' << num(b.center.y) << ' ' << num(b.center.z) << ' '
       << num(b.length) << ' ' << num(b.width) << ' ' << num(b.height) << ' ' << num(b.yaw)
       << '\n';
  }
  atomic_write_file(path, ss.str());
}

RaycastResult raycast(const SyntheticScene& scene, const SensorSpec& spec) {
  spec.validate();
  RaycastResult result;
  result.image = RangeImage::empty(spec);
  result.membership.assign(result.image.range.size(), -1);

  for (int r = 0; r < result.image.rows; ++r) {
    for (int c = 0; c < result.image.cols; ++c) {
      const Point3 dir = cell_direction(spec, r, c);
      double best = std::numeric_limits<double>::infinity();
      int32_t member = -1;
      for (size_t b = 0; b < scene.boxes.size(); ++b) {
        const double t = ray_box_distance(scene.boxes[b], dir);
        if (t < best) {
          best = t;
          member = static_cast<int32_t>(b);
        }
      }
      if (scene.has_ground && dir.z != 0.0) {
        const double t = scene.ground_z / dir.z;
        if (t > 0.0 && t < best) {
          best = t;
          member = -1;
        }
      }
      if (!std::isfinite(best)) continue;
      const size_t cell = result.image.cell(r, c);
      result.image.range[cell] = best;
      result.image.valid[cell] = 1;
      result.membership[cell] = member;
    }
  }
  return result;
}

PredictionMap oracle_predict(const RaycastResult& cast, const std::vector<Box3D>& boxes) {
  const RangeImage& img = cast.image;
  PredictionMap pred = PixelMap::zeros(img.rows, img.cols, AnchorLayout::kTotalChannels);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      if (!img.is_valid(r, c)) continue;
      const int32_t m = cast.member(r, c);
      if (m < 0) continue;
      const Point3 p = cell_point(img.spec, r, c, img.range_at(r, c));
      const BoxEncoding enc = encode_box(p, boxes[m]);
      pred.at(r, c, AnchorLayout::objectness_channel(enc.anchor)) = 1.0;
      for (int k = 0; k < 8; ++k) {
        pred.at(r, c, AnchorLayout::regression_channel(enc.anchor, k)) = enc.values[k];
      }
    }
  }
  return pred;
}

}  // namespace lidarscope
