#pragma once

#include <cstddef>
#include <random>

#include "geoworld/tensor.hpp"

namespace geoworld::nn {

/// Weights and bias of one dense or convolutional layer.
///
/// Convolution weights are [out_channels, in_channels, 3, 3]; linear weights
/// are [out_features, in_features]. Bias length is the output count.
struct LayerParams {
  Tensor weights;
  Tensor bias;

  static LayerParams conv3x3(std::size_t in_channels, std::size_t out_channels);
  static LayerParams dense(std::size_t in_features, std::size_t out_features);

  std::size_t fan_in() const;
  std::size_t outputs() const { return bias.size(); }

  /// Uniform in +-1/sqrt(fan_in) for both weights and bias.
  void init_uniform(std::mt19937_64& rng);

  bool operator==(const LayerParams&) const = default;
};

struct LayerGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

inline constexpr std::size_t kKernel = 3;

/// Valid 3x3 cross-correlation plus bias. Accepts [C,H,W] or batched [N,C,H,W];
/// the output has the same rank as the input.
Tensor conv2d(const Tensor& input, const LayerParams& params, std::size_t stride = 1);
LayerGrads conv2d_backward(const Tensor& input, const LayerParams& params, std::size_t stride,
                           const Tensor& grad_output);

/// W x + b. Accepts [n] or batched [N, n].
Tensor linear(const Tensor& input, const LayerParams& params);
LayerGrads linear_backward(const Tensor& input, const LayerParams& params, const Tensor& grad_output);

Tensor relu(const Tensor& input);
/// Passes gradient where input > 0; the subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

}  // namespace geoworld::nn
