#pragma once

#include <random>
#include <string>
#include <vector>

#include "lidarscope/range_image.hpp"

namespace lidarscope {

// Per-sensor channel elevations, top channel first (strictly decreasing).
struct ChannelTable {
  std::vector<double> elevations;  // radians
  std::string source_name;

  int size() const { return static_cast<int>(elevations.size()); }
  void validate() const;
};

// One way of picking target_rows.size() source channels: entry i is the
// source-table index feeding output row i.
struct ChannelSubset {
  std::vector<int> target_rows;  // strictly increasing source indices
  int subset_id = 0;
  int shift = 0;
  int variant = 0;
};

struct SubsetConfig {
  std::vector<int> shifts{-1, 0, 1};
  std::vector<int> variants{0, 1, 2, 3};
  // Candidates whose gap error is within this of the best are "ambiguous"
  // and selectable by the variant index.
  double tie_tolerance = deg_to_rad(0.15);
};

// Loads a channel table file: one elevation in degrees per line, top channel
// first; '#' starts a comment.
ChannelTable load_channel_table(const std::string& path, const std::string& name = "");

// Drops the six highest and the single lowest channel of a 32-entry table
// and returns the remaining 25 elevations in order.
std::vector<double> select_target_channels(const ChannelTable& table32);

// Greedy top-down matching of target elevations to source channels.
// The first target anchors to the source channel nearest its elevation,
// moved by `shift` source channels. Each following target takes the unused
// source channel whose gap to the previously chosen channel best matches the
// target gap; `variant` selects among near-tie alternatives.
ChannelSubset match_channels(const ChannelTable& source, const std::vector<double>& targets,
                             int shift, int variant, const SubsetConfig& cfg = {});

// Cartesian grid of configured shifts x variants, deduplicated in grid order.
// Combinations that cannot be matched (anchor out of range) are skipped;
// throws ConfigError when nothing remains.
std::vector<ChannelSubset> enumerate_subsets(const ChannelTable& source,
                                             const std::vector<double>& targets,
                                             const SubsetConfig& cfg = {});

// Row-gather: output row i = source row subset.target_rows[i]. Validity and
// point indices carry over; the output spec keeps the source elevations of
// the selected rows. Labels (3D boxes) are untouched by construction.
RangeImage apply_subset(const RangeImage& img, const ChannelSubset& subset);

// Uniform, reproducible choice (rejection sampling on the raw engine output).
const ChannelSubset& pick_subset(std::mt19937_64& rng, const std::vector<ChannelSubset>& subsets);

}  // namespace lidarscope
