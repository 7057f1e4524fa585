#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "aim/data.hpp"
#include "aim/metrics.hpp"
#include "aim/model.hpp"
#include "aim/parameter.hpp"

namespace aim {

struct EpochStats {
  double mean_loss = 0.0;
  std::size_t steps = 0;
  std::size_t skipped_batches = 0;
};

// One pass over the stream's epoch permutation: forward, backward, and an
// optimizer update per batch. With batch normalization on, batches of a
// single row cannot be normalized and are skipped.
EpochStats train_epoch(Model& model, const Dataset& data, const BatchStream& stream, std::size_t epoch,
                       const OptimizerSettings& settings);

// Eval-mode metrics over rows.
MetricReport evaluate(Model& model, const Dataset& data, std::span<const std::size_t> rows);

}  // namespace aim
