#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lidarscope/range_image.hpp"
#include "lidarscope/target_codec.hpp"

namespace lidarscope {

struct Kernel {
  int rows = 1;
  int cols = 1;
};

enum class PaddingMode { kZero, kCircular };

// Architectural contract of the detector: a stem 1x1 convolution followed by
// n_blocks residual blocks at full resolution (no stride, no pooling). The
// final block projects to the prediction channels and has no activation
// after its last layer.
struct ModelConfig {
  int n_blocks = 32;
  int trunk_channels = 64;
  Kernel entry_kernel{1, 1};
  Kernel middle_kernel{1, 7};
  Kernel exit_kernel{1, 1};
  int input_channels = 1;
  int output_channels = AnchorLayout::kTotalChannels;
  PaddingMode padding = PaddingMode::kZero;
  bool activations_enabled = true;  // test hook: false makes the net linear

  void validate() const;
};

struct Shape3 {
  int rows = 0;
  int cols = 0;
  int channels = 0;
};

// Spatial dimensions are preserved exactly; channels become output_channels.
Shape3 output_shape(int rows, int cols, const ModelConfig& config);

// Receptive field under unit stride: 1 + sum(kernel - 1) over the serial path.
std::pair<int, int> receptive_field(const ModelConfig& config);

struct ConvLayer {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_rows = 0;
  int kernel_cols = 0;
  std::vector<float> weights;  // out x in x kh x kw
  std::vector<float> biases;   // out

  size_t weight_index(int oc, int ic, int kr, int kc) const {
    return ((static_cast<size_t>(oc) * in_channels + ic) * kernel_rows + kr) * kernel_cols + kc;
  }
};

struct ModelWeights {
  std::vector<ConvLayer> layers;
};

// Layer shapes in file/application order: stem, then per block entry, middle,
// exit, and for the final block an extra 1x1 skip projection.
std::vector<std::array<int, 4>> expected_layer_shapes(const ModelConfig& config);

// Deterministic small random weights (for tests and benchmarks).
ModelWeights random_weights(const ModelConfig& config, uint64_t seed);

// Naive direct-convolution forward pass. Throws DataError when the weight
// shapes do not match the config.
PredictionMap forward_reference(const ModelConfig& config, const ModelWeights& weights,
                                const NetworkInput& input);

}  // namespace lidarscope
