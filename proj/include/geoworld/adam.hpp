#pragma once

#include <cstdint>
#include <stdexcept>

#include "geoworld/tensor.hpp"

namespace geoworld::nn {

struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t t = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Zeroed moments shaped like `param`.
  static AdamState for_param(const Tensor& param, double lr = 3e-4);

  bool operator==(const AdamState&) const = default;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bias-corrected Adam update of `params` in place. Throws NonFiniteGradient
/// (leaving params and state untouched) if any gradient entry is not finite.
void adam_step(Tensor& params, const Tensor& grads, AdamState& state);

}  // namespace geoworld::nn
