#pragma once

// Batch normalization with the affine part fixed to scale 1, shift 0. Used
// on every raw interaction output so that a gate's magnitude is not
// entangled with the scale of the term it multiplies.

#include <span>

namespace aim {

enum class Mode { train, eval };

struct BnState {
  double batch_mean = 0.0;
  double batch_std = 1.0;  // sqrt(population variance + epsilon) of the last train batch
  double running_mean = 0.0;
  double running_var = 1.0;
  double epsilon = 1e-5;
  double momentum = 0.9;
};

// Normalizes values into out. In train mode batch statistics (population
// variance) are used and, if update_running is set, folded into the running
// averages: running = momentum * running + (1 - momentum) * batch.
// Throws ValidationError in train mode when fewer than two values are given.
void bn_forward(std::span<const double> values, BnState& state, Mode mode, std::span<double> out,
                bool update_running = true);

// Gradient of bn_forward w.r.t. its input, accumulated into dvalues.
// normalized is the forward output; for train mode the state must hold the
// batch statistics of the same forward call.
void bn_backward(std::span<const double> normalized, std::span<const double> dout, const BnState& state, Mode mode,
                 std::span<double> dvalues);

}  // namespace aim
