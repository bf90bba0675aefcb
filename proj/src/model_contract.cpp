#include "lidarscope/model_contract.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lidarscope {

void ModelConfig::validate() const {
  if (n_blocks < 1) throw ConfigError("ModelConfig: n_blocks must be >= 1");
  if (trunk_channels < 1 || input_channels < 1 || output_channels < 1) {
    throw ConfigError("ModelConfig: channel counts must be >= 1");
  }
  for (const Kernel& k : {entry_kernel, middle_kernel, exit_kernel}) {
    if (k.rows < 1 || k.cols < 1) throw ConfigError("ModelConfig: kernel extents must be >= 1");
  }
}

Shape3 output_shape(int rows, int cols, const ModelConfig& config) {
  config.validate();
  if (rows <= 0 || cols <= 0) throw DataError("output_shape: input dimensions must be positive");
  return {rows, cols, config.output_channels};
}

std::pair<int, int> receptive_field(const ModelConfig& config) {
  config.validate();
  int rf_rows = 1;
  int rf_cols = 1;
  auto add = [&](const Kernel& k) {
    rf_rows += k.rows - 1;
    rf_cols += k.cols - 1;
  };
  // stem is 1x1 and contributes nothing
  for (int b = 0; b < config.n_blocks; ++b) {
    add(config.entry_kernel);
    add(config.middle_kernel);
    add(config.exit_kernel);
  }
  return {rf_rows, rf_cols};
}

std::vector<std::array<int, 4>> expected_layer_shapes(const ModelConfig& config) {
  config.validate();
  std::vector<std::array<int, 4>> shapes;
  const int t = config.trunk_channels;
  shapes.push_back({t, config.input_channels, 1, 1});  // stem
  for (int b = 0; b < config.n_blocks; ++b) {
    const bool last = b == config.n_blocks - 1;
    const int out = last ? config.output_channels : t;
    shapes.push_back({t, t, config.entry_kernel.rows, config.entry_kernel.cols});
    shapes.push_back({t, t, config.middle_kernel.rows, config.middle_kernel.cols});
    shapes.push_back({out, t, config.exit_kernel.rows, config.exit_kernel.cols});
    if (last) shapes.push_back({out, t, 1, 1});  // skip projection
  }
  return shapes;
}

ModelWeights random_weights(const ModelConfig& config, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);  // [0, 1)
  };
  ModelWeights w;
  for (const auto& shape : expected_layer_shapes(config)) {
    ConvLayer layer;
    layer.out_channels = shape[0];
    layer.in_channels = shape[1];
    layer.kernel_rows = shape[2];
    layer.kernel_cols = shape[3];
    const size_t fan_in =
        static_cast<size_t>(shape[1]) * shape[2] * shape[3];
    const double scale = std::sqrt(1.0 / static_cast<double>(fan_in));
    layer.weights.resize(static_cast<size_t>(shape[0]) * fan_in);
    for (float& v : layer.weights) {
      v = static_cast<float>((2.0 * uniform() - 1.0) * scale);
    }
    layer.biases.resize(shape[0]);
    for (float& v : layer.biases) v = static_cast<float>((2.0 * uniform() - 1.0) * 0.01);
    w.layers.push_back(std::move(layer));
  }
  return w;
}

namespace {

void check_layer(const ConvLayer& layer, const std::array<int, 4>& shape, size_t index) {
  const bool shape_ok = layer.out_channels == shape[0] && layer.in_channels == shape[1] &&
                        layer.kernel_rows == shape[2] && layer.kernel_cols == shape[3];
  const size_t n_weights =
      static_cast<size_t>(shape[0]) * shape[1] * shape[2] * shape[3];
  if (!shape_ok || layer.weights.size() != n_weights ||
      layer.biases.size() != static_cast<size_t>(shape[0])) {
    throw DataError("forward_reference: layer " + std::to_string(index) + " shape mismatch");
  }
}

// "Same" convolution on a channel-minor buffer.
PixelMap conv2d(const PixelMap& in, const ConvLayer& layer, PaddingMode padding) {
  PixelMap out = PixelMap::zeros(in.rows, in.cols, layer.out_channels);
  const int pad_r = layer.kernel_rows / 2;
  const int pad_c = layer.kernel_cols / 2;
  for (int r = 0; r < in.rows; ++r) {
    for (int c = 0; c < in.cols; ++c) {
      for (int oc = 0; oc < layer.out_channels; ++oc) {
        double acc = layer.biases[oc];
        for (int kr = 0; kr < layer.kernel_rows; ++kr) {
          const int rr = r + kr - pad_r;
          if (rr < 0 || rr >= in.rows) continue;  // rows never wrap
          for (int kc = 0; kc < layer.kernel_cols; ++kc) {
            int cc = c + kc - pad_c;
            if (padding == PaddingMode::kCircular) {
              cc = ((cc % in.cols) + in.cols) % in.cols;
            } else if (cc < 0 || cc >= in.cols) {
              continue;
            }
            const double* in_px = &in.values[in.index(rr, cc, 0)];
            for (int ic = 0; ic < layer.in_channels; ++ic) {
              acc += static_cast<double>(layer.weights[layer.weight_index(oc, ic, kr, kc)]) *
                     in_px[ic];
            }
          }
        }
        out.at(r, c, oc) = acc;
      }
    }
  }
  return out;
}

void relu_inplace(PixelMap& m, bool enabled) {
  if (!enabled) return;
  for (double& v : m.values) v = std::max(v, 0.0);
}

}  // namespace

PredictionMap forward_reference(const ModelConfig& config, const ModelWeights& weights,
                                const NetworkInput& input) {
  config.validate();
  const auto shapes = expected_layer_shapes(config);
  if (weights.layers.size() != shapes.size()) {
    throw DataError("forward_reference: expected " + std::to_string(shapes.size()) +
                    " layers, got " + std::to_string(weights.layers.size()));
  }
  for (size_t i = 0; i < shapes.size(); ++i) check_layer(weights.layers[i], shapes[i], i);
  if (input.rows <= 0 || input.cols <= 0) {
    throw DataError("forward_reference: empty input");
  }

  PixelMap x;
  x.rows = input.rows;
  x.cols = input.cols;
  x.channels = 1;
  x.values = input.values;
  if (config.input_channels != 1) {
    throw DataError("forward_reference: NetworkInput provides a single channel");
  }

  size_t li = 0;
  x = conv2d(x, weights.layers[li++], config.padding);  // stem
  relu_inplace(x, config.activations_enabled);

  for (int b = 0; b < config.n_blocks; ++b) {
    const bool last = b == config.n_blocks - 1;
    PixelMap y = conv2d(x, weights.layers[li++], config.padding);
    relu_inplace(y, config.activations_enabled);
    y = conv2d(y, weights.layers[li++], config.padding);
    relu_inplace(y, config.activations_enabled);
    y = conv2d(y, weights.layers[li++], config.padding);
    if (last) {
      const PixelMap skip = conv2d(x, weights.layers[li++], config.padding);
      for (size_t i = 0; i < y.values.size(); ++i) y.values[i] += skip.values[i];
      x = std::move(y);  // no activation after the last block
    } else {
      for (size_t i = 0; i < y.values.size(); ++i) y.values[i] += x.values[i];
      relu_inplace(y, config.activations_enabled);
      x = std::move(y);
    }
  }
  return x;
}

}  // namespace lidarscope
