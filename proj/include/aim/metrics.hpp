#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "aim/data.hpp"
#include "aim/interactions.hpp"

namespace aim {

struct MetricReport {
  double auc = 0.0;
  double logloss = 0.0;
  std::size_t count = 0;
};

// Probability that a random positive outscores a random negative, ties
// counting one half. Computed from integer win/tie counts over sorted tie
// groups. Throws ValidationError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// Mean stable cross-entropy over logits. Throws on empty input.
double mean_logloss(std::span<const double> logits, std::span<const int> labels);

MetricReport metric_report(std::span<const double> logits, std::span<const int> labels);

// {"split":..., "auc":..., "logloss":..., "count":...}
std::string metric_json(const MetricReport& report, const std::string& split);

// AUC of a lookup predictor that scores each test row by the training CTR of
// the tuple's joint feature values. Unseen combinations fall back to the
// global training CTR.
double statistics_auc(const Dataset& data, std::span<const std::size_t> train_rows,
                      std::span<const std::size_t> test_rows, const InteractionTuple& tuple);

}  // namespace aim
