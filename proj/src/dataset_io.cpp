#include "lidarscope/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <fstream>
#include <iostream>
#include <sstream>

namespace lidarscope {

namespace {

// --- little-endian primitives ---

void put_u32(std::string& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.append(b, 4);
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Cursor {
  const uint8_t* p;
  size_t left;
  std::string path;

  void need(size_t n, const char* what) {
    if (left < n) throw DataError(path + ": truncated " + what);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  float f32(const char* what) {
    const uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("read failed: " + path);
  return ss.str();
}

void check_magic(Cursor& c, const char* magic) {
  c.need(4, "magic");
  if (std::memcmp(c.p, magic, 4) != 0) {
    throw DataError(c.path + ": bad magic, expected " + magic);
  }
  c.p += 4;
  c.left -= 4;
}

double fmt_parse_double(const std::string& tok, const std::string& context) {
  try {
    size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError(context + ": not a number: " + tok);
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Inverse of a rigid 4x4 transform.
std::array<std::array<double, 4>, 4> invert_rigid(const std::array<std::array<double, 4>, 4>& t) {
  std::array<std::array<double, 4>, 4> inv{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) inv[i][j] = t[j][i];
  }
  for (int i = 0; i < 3; ++i) {
    inv[i][3] = -(inv[i][0] * t[0][3] + inv[i][1] * t[1][3] + inv[i][2] * t[2][3]);
  }
  inv[3] = {0.0, 0.0, 0.0, 1.0};
  return inv;
}

Point3 apply_rigid(const std::array<std::array<double, 4>, 4>& t, const Point3& p) {
  return {t[0][0] * p.x + t[0][1] * p.y + t[0][2] * p.z + t[0][3],
          t[1][0] * p.x + t[1][1] * p.y + t[1][2] * p.z + t[1][3],
          t[2][0] * p.x + t[2][1] * p.y + t[2][2] * p.z + t[2][3]};
}

Point3 apply_rotation(const std::array<std::array<double, 4>, 4>& t, const Point3& p) {
  return {t[0][0] * p.x + t[0][1] * p.y + t[0][2] * p.z,
          t[1][0] * p.x + t[1][1] * p.y + t[1][2] * p.z,
          t[2][0] * p.x + t[2][1] * p.y + t[2][2] * p.z};
}

Point3 rect_transpose_apply(const std::array<std::array<double, 3>, 3>& r, const Point3& p) {
  return {r[0][0] * p.x + r[1][0] * p.y + r[2][0] * p.z,
          r[0][1] * p.x + r[1][1] * p.y + r[2][1] * p.z,
          r[0][2] * p.x + r[1][2] * p.y + r[2][2] * p.z};
}

Point3 rect_apply(const std::array<std::array<double, 3>, 3>& r, const Point3& p) {
  return {r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z,
          r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
          r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z};
}

const char* class_token(ObjectClass c) {
  return c == ObjectClass::kVehicle ? "vehicle" : "vulnerable_road_user";
}

ObjectClass class_from_token(const std::string& tok, const std::string& context) {
  if (tok == "vehicle") return ObjectClass::kVehicle;
  if (tok == "vulnerable_road_user") return ObjectClass::kVulnerableRoadUser;
  throw DataError(context + ": unknown class token: " + tok);
}

}  // namespace

PointCloud read_point_cloud(const std::string& path) {
  const std::string data = read_file(path);
  if (data.size() % 16 != 0) {
    throw DataError(path + ": length " + std::to_string(data.size()) +
                    " is not a multiple of 16 bytes");
  }
  PointCloud cloud;
  const size_t n = data.size() / 16;
  cloud.points.reserve(n);
  const uint8_t* p = reinterpret_cast<const uint8_t*>(data.data());
  for (size_t i = 0; i < n; ++i) {
    float xyzi[4];
    std::memcpy(xyzi, p + i * 16, 16);
    if (!std::isfinite(xyzi[0]) || !std::isfinite(xyzi[1]) || !std::isfinite(xyzi[2])) {
      ++cloud.nan_dropped;
      continue;
    }
    cloud.points.push_back({xyzi[0], xyzi[1], xyzi[2]});
    ++cloud.intensity_values_discarded;
  }
  return cloud;
}

CameraCalibration parse_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calib: " + path);
  CameraCalibration calib;
  bool have_p2 = false, have_rect = false, have_tr = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    if (!key.empty() && key.back() == ':') key.pop_back();
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (key == "P2" && vals.size() == 12) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) calib.projection[i][j] = vals[i * 4 + j];
      have_p2 = true;
    } else if ((key == "R0_rect" || key == "R_rect") && vals.size() == 9) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) calib.rectification[i][j] = vals[i * 3 + j];
      have_rect = true;
    } else if (key == "Tr_velo_to_cam" && vals.size() == 12) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) calib.lidar_to_camera[i][j] = vals[i * 4 + j];
      calib.lidar_to_camera[3] = {0.0, 0.0, 0.0, 1.0};
      have_tr = true;
    }
  }
  if (!have_p2 || !have_rect || !have_tr) {
    throw DataError(path + ": missing P2, R0_rect, or Tr_velo_to_cam");
  }
  return calib;
}

std::optional<ObjectClass> map_kitti_class(KittiClass c) {
  switch (c) {
    case KittiClass::kCar:
    case KittiClass::kVan:
      return ObjectClass::kVehicle;
    case KittiClass::kPedestrian:
    case KittiClass::kCyclist:
    case KittiClass::kPersonSitting:
      return ObjectClass::kVulnerableRoadUser;
    default:
      return std::nullopt;
  }
}

FrameLabels parse_labels(const std::string& path, const CameraCalibration& calib) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels: " + path);
  const auto cam_to_lidar = invert_rigid(calib.lidar_to_camera);

  FrameLabels out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string type;
    double trunc, occl, alpha, l_px, t_px, r_px, b_px, h, w, l, x, y, z, ry;
    if (!(ss >> type >> trunc >> occl >> alpha >> l_px >> t_px >> r_px >> b_px >> h >> w >> l >>
          x >> y >> z >> ry)) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed label line");
    }
    const KittiClass raw = kitti_class_from_string(type);
    if (raw == KittiClass::kDontCare) {
      out.dontcare.push_back({l_px, t_px, r_px, b_px});
      continue;
    }

    // KITTI boxes live in the rectified camera frame: location is the bottom
    // center, rotation_y spins about the camera y (down) axis.
    const Point3 bottom_rect{x, y, z};
    const Point3 center_rect{x, y - 0.5 * h, z};
    const Point3 center_cam = rect_transpose_apply(calib.rectification, center_rect);
    const Point3 center_lidar = apply_rigid(cam_to_lidar, center_cam);
    const Point3 forward_rect{std::cos(ry), 0.0, -std::sin(ry)};
    const Point3 forward_cam = rect_transpose_apply(calib.rectification, forward_rect);
    const Point3 forward_lidar = apply_rotation(cam_to_lidar, forward_cam);
    (void)bottom_rect;

    EvalLabel label;
    label.raw_class = raw;
    label.bbox = {l_px, t_px, r_px, b_px};
    label.occlusion = static_cast<int>(occl);
    label.truncation = trunc;
    label.box.center = center_lidar;
    label.box.length = l;
    label.box.width = w;
    label.box.height = h;
    label.box.yaw = wrap_angle(std::atan2(forward_lidar.y, forward_lidar.x));
    label.box.class_id = map_kitti_class(raw).value_or(ObjectClass::kVehicle);
    out.labels.push_back(label);
  }
  return out;
}

void write_labels(const FrameLabels& labels, const CameraCalibration& calib,
                  const std::string& path) {
  std::ostringstream ss;
  for (const EvalLabel& label : labels.labels) {
    // Back to the rectified camera frame.
    const Point3 center_cam = apply_rigid(calib.lidar_to_camera, label.box.center);
    const Point3 center_rect = rect_apply(calib.rectification, center_cam);
    const Point3 forward_lidar{std::cos(label.box.yaw), std::sin(label.box.yaw), 0.0};
    const Point3 forward_cam = apply_rotation(calib.lidar_to_camera, forward_lidar);
    const Point3 forward_rect = rect_apply(calib.rectification, forward_cam);
    const double ry = std::atan2(-forward_rect.z, forward_rect.x);
    ss << to_string(label.raw_class) << ' ' << fmt_double(label.truncation) << ' '
       << label.occlusion << ' ' << fmt_double(0.0) << ' ' << fmt_double(label.bbox.min_u) << ' '
       << fmt_double(label.bbox.min_v) << ' ' << fmt_double(label.bbox.max_u) << ' '
       << fmt_double(label.bbox.max_v) << ' ' << fmt_double(label.box.height) << ' '
       << fmt_double(label.box.width) << ' ' << fmt_double(label.box.length) << ' '
       << fmt_double(center_rect.x) << ' ' << fmt_double(center_rect.y + 0.5 * label.box.height)
       << ' ' << fmt_double(center_rect.z) << ' ' << fmt_double(ry) << '\n';
  }
  for (const Aabb2D& dc : labels.dontcare) {
    ss << "DontCare -1 -1 -10 " << fmt_double(dc.min_u) << ' ' << fmt_double(dc.min_v) << ' '
       << fmt_double(dc.max_u) << ' ' << fmt_double(dc.max_v) << " -1 -1 -1 -1000 -1000 -1000 -10\n";
  }
  atomic_write_file(path, ss.str());
}

std::vector<Box3D> training_boxes(const FrameLabels& labels) {
  std::vector<Box3D> boxes;
  for (const EvalLabel& label : labels.labels) {
    const auto mapped = map_kitti_class(label.raw_class);
    if (!mapped) continue;
    Box3D b = label.box;
    b.class_id = *mapped;
    boxes.push_back(b);
  }
  return boxes;
}

DatasetSplit split_dataset(const std::vector<int64_t>& frame_ids,
                           const std::map<int64_t, std::string>& sequence_of_frame,
                           int target_validation) {
  DatasetSplit split;
  std::vector<std::string> seq_order;
  std::map<std::string, std::vector<int64_t>> frames_of_seq;
  for (int64_t id : frame_ids) {
    const auto it = sequence_of_frame.find(id);
    if (it == sequence_of_frame.end()) {
      throw DataError("split_dataset: frame " + std::to_string(id) + " missing from sequence map");
    }
    if (frames_of_seq.find(it->second) == frames_of_seq.end()) seq_order.push_back(it->second);
    frames_of_seq[it->second].push_back(id);
  }

  for (const std::string& seq : seq_order) {
    auto& dst = static_cast<int>(split.validation.size()) < target_validation ? split.validation
                                                                              : split.training;
    const auto& frames = frames_of_seq[seq];
    dst.insert(dst.end(), frames.begin(), frames.end());
  }
  if (split.training.empty() && !split.validation.empty()) {
    std::clog << "split_dataset: validation target consumes every sequence; "
                 "keeping all frames in training\n";
    split.training = std::move(split.validation);
    split.validation.clear();
    split.degraded = true;
  }
  return split;
}

std::vector<std::pair<int64_t, std::string>> read_sequence_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sequence map: " + path);
  std::vector<std::pair<int64_t, std::string>> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    int64_t frame;
    std::string seq;
    if (ss >> frame >> seq) {
      entries.emplace_back(frame, seq);
    } else {
      std::string tok;
      std::istringstream check(line);
      if (check >> tok) {
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed sequence entry");
      }
    }
  }
  return entries;
}

void write_range_image(const RangeImage& img, const std::string& path) {
  std::string out;
  out.reserve(16 + img.range.size() * 4 + img.rows * 8);
  out.append("LRI1", 4);
  put_u32(out, static_cast<uint32_t>(img.rows));
  put_u32(out, static_cast<uint32_t>(img.cols));
  put_f64(out, img.spec.azimuth_of_column_zero);
  for (double e : img.spec.channel_elevations) put_f64(out, e);
  for (size_t i = 0; i < img.range.size(); ++i) {
    put_f32(out, img.valid[i] ? static_cast<float>(img.range[i])
                              : std::numeric_limits<float>::quiet_NaN());
  }
  atomic_write_file(path, out);
}

RangeImage read_range_image(const std::string& path) {
  const std::string data = read_file(path);
  Cursor c{reinterpret_cast<const uint8_t*>(data.data()), data.size(), path};
  check_magic(c, "LRI1");
  const uint32_t rows = c.u32("rows");
  const uint32_t cols = c.u32("cols");
  if (rows == 0 || cols == 0 || static_cast<uint64_t>(rows) * cols > (uint64_t{1} << 32)) {
    throw DataError(path + ": implausible dimensions");
  }
  SensorSpec spec;
  spec.name = path;
  spec.columns_per_revolution = static_cast<int>(cols);
  spec.azimuth_of_column_zero = c.f64("azimuth");
  spec.channel_elevations.resize(rows);
  for (uint32_t r = 0; r < rows; ++r) spec.channel_elevations[r] = c.f64("elevation");
  spec.validate();

  RangeImage img = RangeImage::empty(spec);
  for (size_t i = 0; i < img.range.size(); ++i) {
    const float v = c.f32("range");
    if (std::isnan(v)) {
      img.valid[i] = 0;
      img.range[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      img.valid[i] = 1;
      img.range[i] = v;
    }
  }
  if (c.left != 0) throw DataError(path + ": trailing bytes");
  return img;
}

void write_pixel_map(const PixelMap& map, const std::string& path) {
  std::string out;
  out.reserve(16 + map.values.size() * 4);
  out.append("LPM1", 4);
  put_u32(out, static_cast<uint32_t>(map.rows));
  put_u32(out, static_cast<uint32_t>(map.cols));
  put_u32(out, static_cast<uint32_t>(map.channels));
  for (double v : map.values) put_f32(out, static_cast<float>(v));
  atomic_write_file(path, out);
}

PixelMap read_pixel_map(const std::string& path) {
  const std::string data = read_file(path);
  Cursor c{reinterpret_cast<const uint8_t*>(data.data()), data.size(), path};
  check_magic(c, "LPM1");
  PixelMap map;
  map.rows = static_cast<int>(c.u32("rows"));
  map.cols = static_cast<int>(c.u32("cols"));
  map.channels = static_cast<int>(c.u32("channels"));
  if (map.rows <= 0 || map.cols <= 0 || map.channels <= 0) {
    throw DataError(path + ": implausible dimensions");
  }
  const size_t n = static_cast<size_t>(map.rows) * map.cols * map.channels;
  if (c.left != n * 4) throw DataError(path + ": payload size mismatch");
  map.values.resize(n);
  for (size_t i = 0; i < n; ++i) map.values[i] = c.f32("value");
  return map;
}

void write_model_weights(const ModelWeights& weights, const std::string& path) {
  std::string out;
  out.append("LWT1", 4);
  put_u32(out, static_cast<uint32_t>(weights.layers.size()));
  for (const ConvLayer& layer : weights.layers) {
    put_u32(out, static_cast<uint32_t>(layer.out_channels));
    put_u32(out, static_cast<uint32_t>(layer.in_channels));
    put_u32(out, static_cast<uint32_t>(layer.kernel_rows));
    put_u32(out, static_cast<uint32_t>(layer.kernel_cols));
    for (float v : layer.weights) put_f32(out, v);
    for (float v : layer.biases) put_f32(out, v);
  }
  atomic_write_file(path, out);
}

ModelWeights read_model_weights(const std::string& path) {
  const std::string data = read_file(path);
  Cursor c{reinterpret_cast<const uint8_t*>(data.data()), data.size(), path};
  check_magic(c, "LWT1");
  const uint32_t n_layers = c.u32("layer count");
  if (n_layers > 4096) throw DataError(path + ": implausible layer count");
  ModelWeights w;
  for (uint32_t i = 0; i < n_layers; ++i) {
    ConvLayer layer;
    layer.out_channels = static_cast<int>(c.u32("out channels"));
    layer.in_channels = static_cast<int>(c.u32("in channels"));
    layer.kernel_rows = static_cast<int>(c.u32("kernel rows"));
    layer.kernel_cols = static_cast<int>(c.u32("kernel cols"));
    if (layer.out_channels <= 0 || layer.in_channels <= 0 || layer.kernel_rows <= 0 ||
        layer.kernel_cols <= 0) {
      throw DataError(path + ": implausible layer shape");
    }
    const size_t n_weights = static_cast<size_t>(layer.out_channels) * layer.in_channels *
                             layer.kernel_rows * layer.kernel_cols;
    layer.weights.resize(n_weights);
    for (size_t k = 0; k < n_weights; ++k) layer.weights[k] = c.f32("weight");
    layer.biases.resize(layer.out_channels);
    for (int k = 0; k < layer.out_channels; ++k) layer.biases[k] = c.f32("bias");
    w.layers.push_back(std::move(layer));
  }
  if (c.left != 0) throw DataError(path + ": trailing bytes");
  return w;
}

void write_detections(const std::map<int64_t, std::vector<Detection>>& per_frame,
                      const std::string& path) {
  std::ostringstream ss;
  for (const auto& [frame, dets] : per_frame) {
    for (const Detection& d : dets) {
      ss << frame << ' ' << class_token(d.box.class_id) << ' ' << fmt_double(d.score) << ' '
         << fmt_double(d.box.center.x) << ' ' << fmt_double(d.box.center.y) << ' '
         << fmt_double(d.box.center.z) << ' ' << fmt_double(d.box.length) << ' '
         << fmt_double(d.box.width) << ' ' << fmt_double(d.box.height) << ' '
         << fmt_double(d.box.yaw) << '\n';
    }
  }
  atomic_write_file(path, ss.str());
}

std::map<int64_t, std::vector<Detection>> read_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open detections: " + path);
  std::map<int64_t, std::vector<Detection>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int64_t frame;
    std::string cls;
    double score, x, y, z, length, width, height, yaw;
    if (!(ss >> frame >> cls >> score >> x >> y >> z >> length >> width >> height >> yaw)) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed detection line");
    }
    Detection d;
    d.box.center = {x, y, z};
    d.box.length = length;
    d.box.width = width;
    d.box.height = height;
    d.box.yaw = yaw;
    d.box.class_id = class_from_token(cls, path + ":" + std::to_string(line_no));
    d.score = score;
    out[frame].push_back(d);
  }
  return out;
}

ReferenceTrack read_reference_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open track: " + path);
  ReferenceTrack track;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    ReferenceTrackEntry e;
    double x, y, z;
    if (ss >> e.frame_id >> x >> y >> z >> e.pose.yaw >> e.pose.length >> e.pose.width >>
        e.pose.height) {
      e.pose.center = {x, y, z};
      track.entries.push_back(e);
    } else {
      std::string tok;
      std::istringstream check(line);
      if (check >> tok) {
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed track entry");
      }
    }
  }
  return track;
}

void atomic_write_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.good()) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("rename failed: " + tmp + " -> " + path);
  }
}

}  // namespace lidarscope
