#include "geoworld/adam.hpp"

#include <cmath>

namespace geoworld::nn {

AdamState AdamState::for_param(const Tensor& param, double lr) {
  AdamState s;
  s.m = Tensor(param.shape());
  s.v = Tensor(param.shape());
  s.lr = lr;
  return s;
}

void adam_step(Tensor& params, const Tensor& grads, AdamState& state) {
  require_same_shape(params, grads, "adam_step");
  require_same_shape(params, state.m, "adam_step (first moment)");
  require_same_shape(params, state.v, "adam_step (second moment)");
  if (!grads.all_finite()) throw NonFiniteGradient("adam_step: non-finite gradient");

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  double* p = params.data();
  double* m = state.m.data();
  double* v = state.v.data();
  const double* g = grads.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace geoworld::nn
