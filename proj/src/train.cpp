#include "aim/train.hpp"

#include <vector>

namespace aim {

EpochStats train_epoch(Model& model, const Dataset& data, const BatchStream& stream, std::size_t epoch,
                       const OptimizerSettings& settings) {
  EpochStats stats;
  double total = 0.0;
  for (const auto& batch : stream.epoch(epoch)) {
    if (model.config().batch_norm && batch.size() < 2) {
      ++stats.skipped_batches;
      continue;
    }
    total += model.accumulate_gradients(data, batch);
    model.params().step(settings);
    ++stats.steps;
  }
  stats.mean_loss = stats.steps ? total / static_cast<double>(stats.steps) : 0.0;
  return stats;
}

MetricReport evaluate(Model& model, const Dataset& data, std::span<const std::size_t> rows) {
  const auto logits = model.predict_logits(data, rows);
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (auto r : rows) labels.push_back(data.label(r));
  return metric_report(logits, labels);
}

}  // namespace aim
