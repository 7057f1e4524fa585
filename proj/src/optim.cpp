#include "aim/optim.hpp"

#include <cmath>

#include "aim/error.hpp"

namespace aim {

double grda_threshold(const GrdaConfig& config, std::uint64_t step) {
  const double t = static_cast<double>(step);
  return config.c * std::sqrt(config.lr) * std::pow(t * config.lr, config.mu);
}

double soft_threshold(double v, double threshold) {
  const double mag = std::abs(v) - threshold;
  if (mag <= 0.0) return 0.0;
  return v > 0.0 ? mag : -mag;
}

void adam_step(Tensor& value, const Tensor& grad, AdamState& state, const AdamConfig& config) {
  if (!value.same_shape(grad)) throw ValidationError("adam_step: gradient shape mismatch");
  if (!grad.all_finite()) throw NumericError("adam_step: non-finite gradient rejected");
  if (state.m.size() != value.size()) {
    state.m = Tensor(value.shape());
    state.v = Tensor(value.shape());
    state.step = 0;
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

Tensor grda_step(GrdaState& state, const Tensor& grad) {
  if (!state.alpha0.same_shape(grad)) throw ValidationError("grda_step: gradient shape mismatch");
  if (!grad.all_finite()) throw NumericError("grda_step: non-finite gradient rejected");
  if (state.accumulator.size() != state.alpha0.size()) state.accumulator = Tensor(state.alpha0.shape());
  const double threshold = grda_threshold(state.config, state.step);
  Tensor out(state.alpha0.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.accumulator[i] += state.config.lr * grad[i];
    out[i] = soft_threshold(state.alpha0[i] - state.accumulator[i], threshold);
  }
  state.step += 1;
  return out;
}

}  // namespace aim
