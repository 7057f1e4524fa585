#include "aim/batchnorm.hpp"

#include <cmath>

#include "aim/error.hpp"

namespace aim {

void bn_forward(std::span<const double> values, BnState& state, Mode mode, std::span<double> out,
                bool update_running) {
  if (values.size() != out.size()) throw ValidationError("bn_forward: shape mismatch");
  if (state.epsilon <= 0.0) throw ValidationError("bn_forward: epsilon must be positive");
  if (mode == Mode::eval) {
    const double inv = 1.0 / std::sqrt(state.running_var + state.epsilon);
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - state.running_mean) * inv;
    return;
  }
  const std::size_t n = values.size();
  if (n < 2) throw ValidationError("bn_forward: train mode needs a batch of at least 2");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double std_dev = std::sqrt(var + state.epsilon);
  for (std::size_t i = 0; i < n; ++i) out[i] = (values[i] - mean) / std_dev;
  state.batch_mean = mean;
  state.batch_std = std_dev;
  if (update_running) {
    state.running_mean = state.momentum * state.running_mean + (1.0 - state.momentum) * mean;
    state.running_var = state.momentum * state.running_var + (1.0 - state.momentum) * var;
  }
}

void bn_backward(std::span<const double> normalized, std::span<const double> dout, const BnState& state, Mode mode,
                 std::span<double> dvalues) {
  if (normalized.size() != dout.size() || dout.size() != dvalues.size()) {
    throw ValidationError("bn_backward: shape mismatch");
  }
  if (mode == Mode::eval) {
    const double inv = 1.0 / std::sqrt(state.running_var + state.epsilon);
    for (std::size_t i = 0; i < dout.size(); ++i) dvalues[i] += dout[i] * inv;
    return;
  }
  const double n = static_cast<double>(dout.size());
  double mean_d = 0.0, mean_dx = 0.0;
  for (std::size_t i = 0; i < dout.size(); ++i) {
    mean_d += dout[i];
    mean_dx += dout[i] * normalized[i];
  }
  mean_d /= n;
  mean_dx /= n;
  const double inv = 1.0 / state.batch_std;
  for (std::size_t i = 0; i < dout.size(); ++i) {
    dvalues[i] += inv * (dout[i] - mean_d - normalized[i] * mean_dx);
  }
}

}  // namespace aim
