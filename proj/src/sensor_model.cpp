#include "lidarscope/sensor_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lidarscope {

void ChannelTable::validate() const {
  if (elevations.empty()) throw DataError("ChannelTable: empty");
  for (size_t i = 1; i < elevations.size(); ++i) {
    if (!(elevations[i] < elevations[i - 1])) {
      throw DataError("ChannelTable '" + source_name + "': elevations not strictly decreasing");
    }
  }
}

ChannelTable load_channel_table(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open channel table: " + path);
  ChannelTable table;
  table.source_name = name.empty() ? path : name;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double deg;
    if (ss >> deg) {
      table.elevations.push_back(deg_to_rad(deg));
      std::string rest;
      if (ss >> rest) {
        throw DataError(path + ":" + std::to_string(line_no) + ": trailing tokens");
      }
    } else {
      std::string tok;
      std::istringstream check(line);
      if (check >> tok) {
        throw DataError(path + ":" + std::to_string(line_no) + ": not a number: " + tok);
      }
    }
  }
  table.validate();
  return table;
}

std::vector<double> select_target_channels(const ChannelTable& table32) {
  if (table32.size() != 32) {
    throw DataError("select_target_channels: expected a 32-channel table, got " +
                    std::to_string(table32.size()));
  }
  // Six highest (entries 0..5) and the single lowest (entry 31) are dropped.
  return std::vector<double>(table32.elevations.begin() + 6, table32.elevations.end() - 1);
}

namespace {

int nearest_source_index(const std::vector<double>& src, double elevation) {
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(src.size()); ++i) {
    const double err = std::abs(src[i] - elevation);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  return best;
}

}  // namespace

ChannelSubset match_channels(const ChannelTable& source, const std::vector<double>& targets,
                             int shift, int variant, const SubsetConfig& cfg) {
  source.validate();
  const int n_src = source.size();
  const int n_tgt = static_cast<int>(targets.size());
  if (n_tgt < 1) throw DataError("match_channels: no targets");
  if (n_src < n_tgt) {
    throw DataError("match_channels: source has " + std::to_string(n_src) +
                    " channels for " + std::to_string(n_tgt) + " targets");
  }
  const std::vector<double>& src = source.elevations;

  ChannelSubset subset;
  subset.shift = shift;
  subset.variant = variant;
  subset.target_rows.resize(n_tgt);

  const int anchor = nearest_source_index(src, targets[0]) + shift;
  // The anchor must leave room for the remaining targets below it.
  if (anchor < 0 || anchor > n_src - n_tgt) {
    throw DataError("match_channels: anchor shift " + std::to_string(shift) + " out of range");
  }
  subset.target_rows[0] = anchor;

  unsigned v = static_cast<unsigned>(variant);
  int prev = anchor;
  for (int i = 1; i < n_tgt; ++i) {
    const double target_gap = targets[i - 1] - targets[i];
    const int last_allowed = n_src - (n_tgt - i);  // leave room below
    double best_err = std::numeric_limits<double>::infinity();
    for (int s = prev + 1; s <= last_allowed; ++s) {
      best_err = std::min(best_err, std::abs((src[prev] - src[s]) - target_gap));
    }
    std::vector<std::pair<double, int>> candidates;  // (err, index)
    for (int s = prev + 1; s <= last_allowed; ++s) {
      const double err = std::abs((src[prev] - src[s]) - target_gap);
      if (err <= best_err + cfg.tie_tolerance) candidates.emplace_back(err, s);
    }
    std::stable_sort(candidates.begin(), candidates.end());
    int pick = candidates.front().second;
    if (candidates.size() > 1) {
      pick = candidates[v % candidates.size()].second;
      v /= static_cast<unsigned>(candidates.size());
    }
    subset.target_rows[i] = pick;
    prev = pick;
  }
  return subset;
}

std::vector<ChannelSubset> enumerate_subsets(const ChannelTable& source,
                                             const std::vector<double>& targets,
                                             const SubsetConfig& cfg) {
  std::vector<ChannelSubset> out;
  for (int shift : cfg.shifts) {
    for (int variant : cfg.variants) {
      ChannelSubset s;
      try {
        s = match_channels(source, targets, shift, variant, cfg);
      } catch (const DataError&) {
        continue;  // this grid point has no valid matching
      }
      const bool duplicate = std::any_of(out.begin(), out.end(), [&](const ChannelSubset& o) {
        return o.target_rows == s.target_rows;
      });
      if (duplicate) continue;
      s.subset_id = static_cast<int>(out.size());
      out.push_back(std::move(s));
    }
  }
  if (out.empty()) throw ConfigError("enumerate_subsets: configuration yields no subsets");
  return out;
}

RangeImage apply_subset(const RangeImage& img, const ChannelSubset& subset) {
  for (int r : subset.target_rows) {
    if (r < 0 || r >= img.rows) {
      throw DataError("apply_subset: source row " + std::to_string(r) + " out of range [0, " +
                      std::to_string(img.rows) + ")");
    }
  }
  SensorSpec spec = img.spec;
  spec.name = img.spec.name + "/subset" + std::to_string(subset.subset_id);
  spec.channel_elevations.clear();
  for (int r : subset.target_rows) spec.channel_elevations.push_back(img.spec.channel_elevations[r]);

  RangeImage out = RangeImage::empty(spec);
  for (int i = 0; i < out.rows; ++i) {
    const int src_row = subset.target_rows[i];
    const size_t src_off = static_cast<size_t>(src_row) * img.cols;
    const size_t dst_off = static_cast<size_t>(i) * out.cols;
    std::copy_n(img.range.begin() + src_off, img.cols, out.range.begin() + dst_off);
    std::copy_n(img.valid.begin() + src_off, img.cols, out.valid.begin() + dst_off);
    std::copy_n(img.point_index.begin() + src_off, img.cols, out.point_index.begin() + dst_off);
  }
  return out;
}

const ChannelSubset& pick_subset(std::mt19937_64& rng, const std::vector<ChannelSubset>& subsets) {
  if (subsets.empty()) throw DataError("pick_subset: empty subset list");
  const uint64_t n = subsets.size();
  const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return subsets[x % n];
}

}  // namespace lidarscope
