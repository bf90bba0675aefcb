#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lidarscope/dataset_io.hpp"
#include "lidarscope/evaluation.hpp"
#include "lidarscope/model_contract.hpp"
#include "lidarscope/postprocess.hpp"
#include "lidarscope/sensor_model.hpp"
#include "lidarscope/test_support.hpp"

namespace {

using namespace lidarscope;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitData = 4;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct PostprocessFlags {
  double threshold = 0.05;
  int window_rows = 3;
  int window_cols = 5;
  std::string edge = "wrap";
  double cell_size = 0.2;
  bool conservative = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--threshold", threshold, "objectness score threshold")
        ->capture_default_str();
    cmd->add_option("--window-rows", window_rows, "neighborhood minimum window rows")
        ->capture_default_str();
    cmd->add_option("--window-cols", window_cols, "neighborhood minimum window columns")
        ->capture_default_str();
    cmd->add_option("--edge", edge, "column edge handling: wrap or clip")
        ->check(CLI::IsMember({"wrap", "clip"}))
        ->capture_default_str();
    cmd->add_option("--cell-size", cell_size, "NMS grid cell size in meters")
        ->capture_default_str();
    cmd->add_flag("--conservative", conservative,
                  "NMS covers every cell the footprint touches, not only cell centers");
  }

  PostprocessParams params() const {
    PostprocessParams p;
    p.threshold = threshold;
    p.window_rows = window_rows;
    p.window_cols = window_cols;
    p.edge_mode = edge == "wrap" ? ColumnEdgeMode::kWrap : ColumnEdgeMode::kClip;
    p.nms_cell_size = cell_size;
    p.conservative_cells = conservative;
    return p;
  }
};

SensorSpec spec_from_table(const std::string& table_path, int columns, double azimuth0,
                           const std::string& name) {
  const ChannelTable table = load_channel_table(table_path, name);
  SensorSpec spec;
  spec.name = table.source_name;
  spec.columns_per_revolution = columns;
  spec.channel_elevations = table.elevations;
  spec.azimuth_of_column_zero = azimuth0;
  spec.validate();
  return spec;
}

std::string frame_file(const std::string& dir, int64_t frame, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(frame));
  return dir + "/" + buf + ext;
}

// --- convert ---

struct ConvertArgs {
  std::string input, output, table;
  int columns = 1808;
  double azimuth0 = 0.0;
  bool reconstruct = false;
  int expected_rows = 64;
};

void run_convert(const ConvertArgs& a) {
  const PointCloud cloud = read_point_cloud(a.input);
  if (cloud.nan_dropped > 0) {
    std::clog << "convert: dropped " << cloud.nan_dropped << " non-finite points\n";
  }
  SensorSpec spec;
  if (a.reconstruct) {
    const ChannelReconstruction rec = reconstruct_channels(cloud.points, a.expected_rows);
    if (rec.degraded) {
      throw DataError("convert: degraded channel reconstruction (" +
                      std::to_string(rec.populated_rows) + " of " +
                      std::to_string(a.expected_rows) + " rows populated)");
    }
    spec.name = a.input;
    spec.columns_per_revolution = a.columns;
    spec.azimuth_of_column_zero = a.azimuth0;
    spec.channel_elevations = rec.elevations;
    spec.validate();
  } else {
    if (a.table.empty()) throw ConfigError("convert: need --table or --reconstruct");
    spec = spec_from_table(a.table, a.columns, a.azimuth0, "");
  }
  BuildStats stats;
  const RangeImage img = build_range_image(cloud.points, spec, &stats);
  write_range_image(img, a.output);
  std::cout << "kept=" << stats.kept << " shadowed=" << stats.shadowed
            << " dropped=" << stats.dropped << "\n";
}

// --- simulate ---

struct SimulateArgs {
  std::string input, output, source_table, target_table;
  int subset_id = -1;
  uint64_t seed = 0;
  bool have_seed = false;
  std::vector<int> shifts;
  std::vector<int> variants;
  double tie_tolerance_deg = 0.15;
};

void run_simulate(const SimulateArgs& a) {
  const RangeImage img = read_range_image(a.input);
  const ChannelTable source = load_channel_table(a.source_table, "source");
  const ChannelTable target32 = load_channel_table(a.target_table, "target");
  SubsetConfig cfg;
  if (!a.shifts.empty()) cfg.shifts = a.shifts;
  if (!a.variants.empty()) cfg.variants = a.variants;
  cfg.tie_tolerance = deg_to_rad(a.tie_tolerance_deg);
  const auto targets = select_target_channels(target32);
  const auto subsets = enumerate_subsets(source, targets, cfg);

  const ChannelSubset* chosen = nullptr;
  if (a.subset_id >= 0) {
    if (a.subset_id >= static_cast<int>(subsets.size())) {
      throw ConfigError("simulate: subset id " + std::to_string(a.subset_id) +
                        " out of range, have " + std::to_string(subsets.size()));
    }
    chosen = &subsets[a.subset_id];
  } else if (a.have_seed) {
    std::mt19937_64 rng(a.seed);
    chosen = &pick_subset(rng, subsets);
  } else {
    throw ConfigError("simulate: need --subset or --seed");
  }
  write_range_image(apply_subset(img, *chosen), a.output);
  std::cout << "subset=" << chosen->subset_id << " shift=" << chosen->shift
            << " variant=" << chosen->variant << " of " << subsets.size() << "\n";
}

// --- encode ---

struct EncodeArgs {
  std::string image, labels, calib, output_targets, output_masks;
  std::string window = "calib";
};

void run_encode(const EncodeArgs& a) {
  const RangeImage img = read_range_image(a.image);
  const CameraCalibration calib = parse_calibration(a.calib);
  const FrameLabels labels = parse_labels(a.labels, calib);

  AzimuthWindow window = AzimuthWindow::full();
  if (a.window == "calib") window = azimuth_window_from_calib(calib);
  else if (a.window == "front180") window = AzimuthWindow::front_half();
  else if (a.window != "full") throw ConfigError("encode: unknown window: " + a.window);

  const RasterizeResult result =
      rasterize_targets(img, training_boxes(labels), labels.dontcare, calib, window);
  if (result.degenerate_boxes_skipped > 0) {
    std::clog << "encode: skipped " << result.degenerate_boxes_skipped << " degenerate boxes\n";
  }
  write_pixel_map(result.targets, a.output_targets);
  if (!a.output_masks.empty()) {
    PixelMap masks = PixelMap::zeros(img.rows, img.cols, 1 + AnchorLayout::kNumAnchors);
    for (int r = 0; r < img.rows; ++r) {
      for (int c = 0; c < img.cols; ++c) {
        masks.at(r, c, 0) = result.masks.classification[result.masks.pixel(r, c)] ? 1.0 : 0.0;
        for (int an = 0; an < AnchorLayout::kNumAnchors; ++an) {
          masks.at(r, c, 1 + an) =
              result.masks.regression[result.masks.anchor_slot(r, c, an)] ? 1.0 : 0.0;
        }
      }
    }
    write_pixel_map(masks, a.output_masks);
  }
}

// --- detect ---

struct DetectArgs {
  std::string predictions, image, output;
  bool oracle = false;
  std::string scene, table;
  int columns = 256;
  double azimuth0 = 0.0;
  int64_t frame_id = 0;
  PostprocessFlags post;
};

void run_detect(const DetectArgs& a) {
  RangeImage img;
  PredictionMap pred;
  if (a.oracle) {
    if (a.scene.empty() || a.table.empty()) {
      throw ConfigError("detect --oracle: need --scene and --table");
    }
    const SyntheticScene scene = read_scene(a.scene);
    const SensorSpec spec = spec_from_table(a.table, a.columns, a.azimuth0, "oracle");
    const RaycastResult cast = raycast(scene, spec);
    pred = oracle_predict(cast, scene.boxes);
    img = cast.image;
  } else {
    if (a.predictions.empty() || a.image.empty()) {
      throw ConfigError("detect: need --predictions and --image (or --oracle)");
    }
    img = read_range_image(a.image);
    pred = read_pixel_map(a.predictions);
  }
  const std::vector<Detection> dets = run_postprocess(pred, img, a.post.params());
  std::map<int64_t, std::vector<Detection>> per_frame;
  per_frame[a.frame_id] = dets;
  write_detections(per_frame, a.output);
  std::cout << "detections=" << dets.size() << "\n";
}

// --- evaluate ---

struct EvaluateArgs {
  std::string detections, labels_dir, calib_dir, output, pr_output;
  std::string space = "bev";
  std::string cls = "car";
  int jobs = 1;
  int points = 11;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto per_frame = read_detections(a.detections);
  std::vector<int64_t> frames;
  for (const auto& [frame, dets] : per_frame) frames.push_back(frame);

  MatchSpace space;
  if (a.space == "2d") space = MatchSpace::kImage2D;
  else if (a.space == "bev") space = MatchSpace::kBev;
  else if (a.space == "3d") space = MatchSpace::k3D;
  else throw ConfigError("evaluate: unknown space: " + a.space);

  EvalConfig config;
  if (a.cls == "car") config = car_eval_config(space);
  else if (a.cls == "pedestrian") config = pedestrian_eval_config(space);
  else throw ConfigError("evaluate: unknown class: " + a.cls);
  config.interpolation_points = a.points;

  const size_t n = frames.size();
  std::vector<std::vector<Detection>> dets(n);
  std::vector<std::vector<EvalLabel>> labels(n);
  std::vector<CameraCalibration> calibs(n);

  const int jobs = std::max(1, a.jobs);
  std::vector<std::thread> workers;
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&]() {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          const int64_t frame = frames[i];
          dets[i] = per_frame.at(frame);
          calibs[i] = parse_calibration(frame_file(a.calib_dir, frame, ".txt"));
          labels[i] = parse_labels(frame_file(a.labels_dir, frame, ".txt"), calibs[i]).labels;
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (first_error.empty()) first_error = e.what();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (!first_error.empty()) throw DataError(first_error);

  const auto rows = evaluate_dataset(dets, labels, calibs, config);
  std::ostringstream csv;
  csv << "space,class,difficulty,ap,valid_labels\n";
  const char* diff_names[] = {"easy", "moderate", "hard"};
  for (const DatasetApRow& row : rows) {
    csv << a.space << ',' << a.cls << ',' << diff_names[static_cast<int>(row.level)] << ','
        << num(row.ap) << ',' << row.valid_labels << '\n';
  }
  atomic_write_file(a.output, csv.str());

  if (!a.pr_output.empty()) {
    std::ostringstream pr;
    pr << "difficulty,recall,precision\n";
    for (Difficulty level : {Difficulty::kEasy, Difficulty::kModerate, Difficulty::kHard}) {
      std::vector<ScoredOutcome> all;
      int positives = 0;
      for (size_t f = 0; f < n; ++f) {
        const FrameMatchResult fr =
            match_detections(dets[f], labels[f], calibs[f], config, level);
        all.insert(all.end(), fr.detections.begin(), fr.detections.end());
        positives += fr.valid_labels;
      }
      const ApResult ap = average_precision(all, positives, config.interpolation_points);
      for (const PrPoint& p : ap.curve) {
        pr << diff_names[static_cast<int>(level)] << ',' << num(p.recall) << ','
           << num(p.precision) << '\n';
      }
    }
    atomic_write_file(a.pr_output, pr.str());
  }
  for (const DatasetApRow& row : rows) {
    std::cout << diff_names[static_cast<int>(row.level)] << " AP=" << num6(row.ap) << "\n";
  }
}

// --- refeval ---

struct RefevalArgs {
  std::string detections, track, output;
  double radius = 2.5;
};

void run_refeval(const RefevalArgs& a) {
  const auto per_frame = read_detections(a.detections);
  const ReferenceTrack track = read_reference_track(a.track);
  const auto report = reference_vehicle_report(per_frame, track, a.radius);

  std::ostringstream csv;
  csv << "metric";
  for (const auto& bin : report) csv << ',' << bin.label;
  csv << '\n';
  auto row = [&](const char* name, auto get) {
    csv << name;
    for (const auto& bin : report) csv << ',' << get(bin);
    csv << '\n';
  };
  row("evaluation_frames", [](const ReferenceBinReport& b) { return std::to_string(b.frames); });
  row("detection_ratio",
      [](const ReferenceBinReport& b) { return num6(b.detection_ratio); });
  row("radial_position_rmse_m",
      [](const ReferenceBinReport& b) { return num6(b.rmse_radial); });
  row("tangential_position_rmse_m",
      [](const ReferenceBinReport& b) { return num6(b.rmse_tangential); });
  row("vertical_position_rmse_m",
      [](const ReferenceBinReport& b) { return num6(b.rmse_vertical); });
  row("orientation_rmse_deg",
      [](const ReferenceBinReport& b) { return num6(rad_to_deg(b.rmse_orientation)); });
  row("length_rmse_m", [](const ReferenceBinReport& b) { return num6(b.rmse_length); });
  row("width_rmse_m", [](const ReferenceBinReport& b) { return num6(b.rmse_width); });
  row("height_rmse_m", [](const ReferenceBinReport& b) { return num6(b.rmse_height); });
  atomic_write_file(a.output, csv.str());
  std::cout << "bins=" << report.size() << "\n";
}

// --- channels ---

struct ChannelsArgs {
  std::string source_table, target_table, output;
  bool plot = false;
};

void run_channels(const ChannelsArgs& a) {
  const ChannelTable source = load_channel_table(a.source_table, "hdl64");
  const ChannelTable target32 = load_channel_table(a.target_table, "vlp32");
  const auto targets = select_target_channels(target32);
  const auto subsets = enumerate_subsets(source, targets);

  if (a.plot) {
    // One row per channel of both sensors, with the selection used for
    // prediction (target sensor) and the first subset (source sensor).
    std::ostringstream csv;
    csv << "sensor,channel,elevation_deg,selected\n";
    for (int i = 0; i < target32.size(); ++i) {
      const bool selected = i >= 6 && i < target32.size() - 1;
      csv << "vlp32," << i << ',' << num(rad_to_deg(target32.elevations[i])) << ','
          << (selected ? 1 : 0) << '\n';
    }
    const ChannelSubset& first = subsets.front();
    for (int i = 0; i < source.size(); ++i) {
      const bool selected =
          std::find(first.target_rows.begin(), first.target_rows.end(), i) !=
          first.target_rows.end();
      csv << "hdl64," << i << ',' << num(rad_to_deg(source.elevations[i])) << ','
          << (selected ? 1 : 0) << '\n';
    }
    if (a.output.empty()) std::cout << csv.str();
    else atomic_write_file(a.output, csv.str());
    return;
  }

  double worst_gap_dev = 0.0;
  for (const ChannelSubset& s : subsets) {
    for (size_t i = 1; i < s.target_rows.size(); ++i) {
      const double src_gap =
          source.elevations[s.target_rows[i - 1]] - source.elevations[s.target_rows[i]];
      const double tgt_gap = targets[i - 1] - targets[i];
      worst_gap_dev = std::max(worst_gap_dev, std::abs(src_gap - tgt_gap));
    }
  }
  std::cout << "subsets=" << subsets.size()
            << " max_gap_deviation_deg=" << num6(rad_to_deg(worst_gap_dev)) << "\n";
  for (const ChannelSubset& s : subsets) {
    std::cout << "subset " << s.subset_id << " shift=" << s.shift << " variant=" << s.variant
              << " rows=";
    for (size_t i = 0; i < s.target_rows.size(); ++i) {
      std::cout << (i ? "," : "") << s.target_rows[i];
    }
    std::cout << "\n";
  }
}

// --- bench ---

struct BenchArgs {
  std::string what = "nms";
  int n = 5000;
  int trials = 20;
  uint64_t seed = 1;
  PostprocessFlags post;
};

std::vector<Detection> random_detections(int n, std::mt19937_64& rng) {
  auto uniform = [&rng](double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
  };
  std::vector<Detection> dets(n);
  for (Detection& d : dets) {
    d.box.center = {uniform(-60.0, 60.0), uniform(-60.0, 60.0), uniform(-1.0, 1.0)};
    d.box.length = uniform(3.5, 5.5);
    d.box.width = uniform(1.5, 2.1);
    d.box.height = uniform(1.3, 1.9);
    d.box.yaw = uniform(-kPi, kPi);
    d.score = uniform(0.05, 1.0);
  }
  return dets;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void run_bench(const BenchArgs& a) {
  using clock = std::chrono::steady_clock;
  std::mt19937_64 rng(a.seed);
  if (a.what == "nms") {
    std::vector<double> times;
    size_t kept_total = 0;
    for (int t = 0; t < a.trials; ++t) {
      const auto dets = random_detections(a.n, rng);
      const auto start = clock::now();
      const auto kept = grid_nms(dets, a.post.cell_size, a.post.conservative);
      const auto stop = clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
      kept_total += kept.size();
    }
    const double mean =
        std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    std::cout << "bench=nms n=" << a.n << " trials=" << a.trials << " mean_ms=" << num6(mean)
              << " median_ms=" << num6(median(times)) << " kept_avg="
              << kept_total / static_cast<size_t>(a.trials) << "\n";
    return;
  }
  if (a.what == "pipeline") {
    // Sparse synthetic prediction map on a full-size VLP-32 revolution.
    SensorSpec spec;
    spec.name = "bench";
    spec.columns_per_revolution = 1808;
    for (int i = 0; i < 25; ++i) spec.channel_elevations.push_back(deg_to_rad(2.0 - i * 0.6));
    SyntheticScene scene;
    auto uniform = [&rng](double lo, double hi) {
      const double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
      return lo + u * (hi - lo);
    };
    for (int i = 0; i < 60; ++i) {
      Box3D b;
      const double angle = uniform(-kPi, kPi);
      const double dist = uniform(8.0, 45.0);
      b.center = {dist * std::cos(angle), dist * std::sin(angle), -0.8};
      b.length = uniform(3.8, 5.0);
      b.width = uniform(1.6, 2.0);
      b.height = uniform(1.4, 1.8);
      b.yaw = uniform(-kPi, kPi);
      scene.boxes.push_back(b);
    }
    scene.has_ground = true;
    scene.ground_z = -1.7;
    const RaycastResult cast = raycast(scene, spec);
    PredictionMap pred = oracle_predict(cast, scene.boxes);
    // Perturb objectness a little so thresholding has real work to do.
    for (int r = 0; r < pred.rows; ++r) {
      for (int c = 0; c < pred.cols; ++c) {
        for (int an = 0; an < AnchorLayout::kNumAnchors; ++an) {
          double& v = pred.at(r, c, AnchorLayout::objectness_channel(an));
          v = std::min(1.0, v + uniform(0.0, 0.04));
        }
      }
    }
    std::vector<double> times;
    size_t dets = 0;
    for (int t = 0; t < a.trials; ++t) {
      const auto start = clock::now();
      const auto kept = run_postprocess(pred, cast.image, a.post.params());
      const auto stop = clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
      dets = kept.size();
    }
    const double mean =
        std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    std::cout << "bench=pipeline rows=25 cols=1808 trials=" << a.trials
              << " mean_ms=" << num6(mean) << " median_ms=" << num6(median(times))
              << " detections=" << dets << "\n";
    return;
  }
  throw ConfigError("bench: unknown benchmark: " + a.what);
}

// --- split ---

struct SplitArgs {
  std::string map_path, output;
  int target = 1391;
};

void run_split(const SplitArgs& a) {
  const auto entries = read_sequence_map(a.map_path);
  std::vector<int64_t> frames;
  std::map<int64_t, std::string> seq_of;
  for (const auto& [frame, seq] : entries) {
    frames.push_back(frame);
    seq_of[frame] = seq;
  }
  const DatasetSplit split = split_dataset(frames, seq_of, a.target);
  std::ostringstream out;
  for (int64_t f : split.training) out << f << " train\n";
  for (int64_t f : split.validation) out << f << " val\n";
  atomic_write_file(a.output, out.str());
  std::cout << "training=" << split.training.size() << " validation=" << split.validation.size()
            << (split.degraded ? " degraded=1" : "") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lidarscope: cross-sensor LiDAR range-image detection toolkit"};
  app.require_subcommand(1);
  const char* env_config = std::getenv("LIDARSCOPE_CONFIG");
  app.set_config("--config", env_config ? env_config : "",
                 "flat key=value configuration file (flags override)");

  ConvertArgs convert_args;
  CLI::App* convert = app.add_subcommand("convert", "point cloud (.bin) to range image (LRI1)");
  convert->add_option("--input", convert_args.input, "KITTI velodyne .bin file")->required();
  convert->add_option("--output", convert_args.output, "output LRI1 path")->required();
  convert->add_option("--table", convert_args.table, "channel table file (degrees per line)");
  convert->add_option("--columns", convert_args.columns, "columns per revolution")
      ->capture_default_str();
  convert->add_option("--azimuth0", convert_args.azimuth0, "azimuth of column zero (radians)")
      ->capture_default_str();
  convert->add_flag("--reconstruct", convert_args.reconstruct,
                    "estimate channel alignment from the cloud");
  convert->add_option("--expected-rows", convert_args.expected_rows,
                      "channel count for --reconstruct")
      ->capture_default_str();
  convert->callback([&]() { run_convert(convert_args); });

  SimulateArgs sim_args;
  CLI::App* simulate =
      app.add_subcommand("simulate", "64-row range image + channel subset to 25-row image");
  simulate->add_option("--input", sim_args.input, "source LRI1")->required();
  simulate->add_option("--output", sim_args.output, "output LRI1")->required();
  simulate->add_option("--source-table", sim_args.source_table, "source sensor channel table")
      ->required();
  simulate->add_option("--target-table", sim_args.target_table, "32-channel target table")
      ->required();
  simulate->add_option("--subset", sim_args.subset_id, "fixed subset id");
  simulate->add_option("--seed", sim_args.seed, "random subset selection seed")
      ->each([&](const std::string&) { sim_args.have_seed = true; });
  simulate->add_option("--shifts", sim_args.shifts, "anchor shifts in source channels");
  simulate->add_option("--variants", sim_args.variants, "lower-channel variant indices");
  simulate->add_option("--tie-tolerance", sim_args.tie_tolerance_deg,
                       "ambiguity tolerance in degrees")
      ->capture_default_str();
  simulate->callback([&]() { run_simulate(sim_args); });

  EncodeArgs encode_args;
  CLI::App* encode = app.add_subcommand("encode", "frame to training targets + masks (LPM1)");
  encode->add_option("--image", encode_args.image, "range image LRI1")->required();
  encode->add_option("--labels", encode_args.labels, "KITTI label file")->required();
  encode->add_option("--calib", encode_args.calib, "KITTI calib file")->required();
  encode->add_option("--output-targets", encode_args.output_targets, "target map LPM1")
      ->required();
  encode->add_option("--output-masks", encode_args.output_masks,
                     "mask map LPM1 (channel 0 classification, 1..8 regression)");
  encode->add_option("--window", encode_args.window,
                     "classification azimuth window: calib, front180, or full")
      ->capture_default_str();
  encode->callback([&]() { run_encode(encode_args); });

  DetectArgs detect_args;
  CLI::App* detect = app.add_subcommand("detect", "prediction map (or oracle) to detections");
  detect->add_option("--predictions", detect_args.predictions, "prediction map LPM1");
  detect->add_option("--image", detect_args.image, "matching range image LRI1");
  detect->add_flag("--oracle", detect_args.oracle, "raycast a scene and decode exact targets");
  detect->add_option("--scene", detect_args.scene, "scene file for --oracle");
  detect->add_option("--table", detect_args.table, "channel table for --oracle");
  detect->add_option("--columns", detect_args.columns, "columns per revolution for --oracle")
      ->capture_default_str();
  detect->add_option("--azimuth0", detect_args.azimuth0, "azimuth of column zero (radians)")
      ->capture_default_str();
  detect->add_option("--frame-id", detect_args.frame_id, "frame id for the output file")
      ->capture_default_str();
  detect->add_option("--output", detect_args.output, "detections text file")->required();
  detect_args.post.attach(detect);
  detect->callback([&]() { run_detect(detect_args); });

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "detections + labels to AP report");
  evaluate->add_option("--detections", eval_args.detections, "detections text file")->required();
  evaluate->add_option("--labels-dir", eval_args.labels_dir, "directory of KITTI label files")
      ->required();
  evaluate->add_option("--calib-dir", eval_args.calib_dir, "directory of KITTI calib files")
      ->required();
  evaluate->add_option("--output", eval_args.output, "AP report CSV")->required();
  evaluate->add_option("--pr-output", eval_args.pr_output, "PR curve CSV");
  evaluate->add_option("--space", eval_args.space, "matching space: 2d, bev, or 3d")
      ->check(CLI::IsMember({"2d", "bev", "3d"}))
      ->capture_default_str();
  evaluate->add_option("--class", eval_args.cls, "evaluated class: car or pedestrian")
      ->check(CLI::IsMember({"car", "pedestrian"}))
      ->capture_default_str();
  evaluate->add_option("--points", eval_args.points, "AP interpolation points")
      ->capture_default_str();
  evaluate->add_option("--jobs", eval_args.jobs, "frame loading worker threads")
      ->capture_default_str();
  evaluate->callback([&]() { run_evaluate(eval_args); });

  RefevalArgs refeval_args;
  CLI::App* refeval =
      app.add_subcommand("refeval", "detections + reference track to per-distance-bin CSV");
  refeval->add_option("--detections", refeval_args.detections, "detections text file")
      ->required();
  refeval->add_option("--track", refeval_args.track, "reference track file")->required();
  refeval->add_option("--output", refeval_args.output, "report CSV")->required();
  refeval->add_option("--radius", refeval_args.radius, "association radius in meters")
      ->capture_default_str();
  refeval->callback([&]() { run_refeval(refeval_args); });

  ChannelsArgs channels_args;
  CLI::App* channels = app.add_subcommand("channels", "channel tables and subset matching");
  channels->add_option("--source-table", channels_args.source_table, "source (64) channel table")
      ->required();
  channels->add_option("--target-table", channels_args.target_table, "target (32) channel table")
      ->required();
  channels->add_flag("--plot", channels_args.plot, "emit per-channel CSV with selection flags");
  channels->add_option("--output", channels_args.output, "CSV output path (default stdout)");
  channels->callback([&]() { run_channels(channels_args); });

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "timing benchmarks");
  bench->add_option("what", bench_args.what, "nms or pipeline")
      ->check(CLI::IsMember({"nms", "pipeline"}));
  bench->add_option("--n", bench_args.n, "detections per NMS trial")->capture_default_str();
  bench->add_option("--trials", bench_args.trials, "number of timed trials")
      ->capture_default_str();
  bench->add_option("--seed", bench_args.seed, "input generation seed")->capture_default_str();
  bench_args.post.attach(bench);
  bench->callback([&]() { run_bench(bench_args); });

  SplitArgs split_args;
  CLI::App* split = app.add_subcommand("split", "sequence-grouped train/validation split");
  split->add_option("--map", split_args.map_path, "sequence map file (frame_id sequence_id)")
      ->required();
  split->add_option("--output", split_args.output, "split file (frame_id train|val)")
      ->required();
  split->add_option("--target", split_args.target, "validation frame count target")
      ->capture_default_str();
  split->callback([&]() { run_split(split_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
