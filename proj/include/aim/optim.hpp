#pragma once

// Adam for network weights and GRDA (generalized regularized dual averaging)
// for architecture gates.

#include <cstdint>

#include "aim/tensor.hpp"

namespace aim {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::uint64_t step = 0;
};

struct GrdaConfig {
  double lr = 0.01;  // gamma
  double c = 0.05;
  double mu = 0.6;
};

// alpha0 is captured when the gate is registered; the accumulator holds
// gamma * sum of gradients seen so far.
struct GrdaState {
  GrdaConfig config;
  Tensor alpha0;
  Tensor accumulator;
  std::uint64_t step = 0;
};

// g(t, gamma) = c * gamma^(1/2) * (t * gamma)^mu
double grda_threshold(const GrdaConfig& config, std::uint64_t step);

// sign(v) * max(|v| - threshold, 0); exactly zero inside the band.
double soft_threshold(double v, double threshold);

// Bias-corrected Adam. Throws NumericError (leaving value and state
// untouched) if grad holds a non-finite entry.
void adam_step(Tensor& value, const Tensor& grad, AdamState& state, const AdamConfig& config);

// Folds gamma * grad into the accumulator and returns
// soft_threshold(alpha0 - accumulator, g(t, gamma)) elementwise, then
// increments t. Throws NumericError on non-finite grad without mutating state.
Tensor grda_step(GrdaState& state, const Tensor& grad);

}  // namespace aim
