#include "aim/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

#include "json.hpp"

#include "aim/error.hpp"
#include "aim/ops.hpp"

namespace aim {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t positives = 0, negatives = 0;
  std::uint64_t wins = 0, ties = 0;  // pairs (pos, neg) with pos > neg / pos == neg
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t group_pos = 0, group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) {
        ++group_pos;
      } else if (labels[order[j]] == 0) {
        ++group_neg;
      } else {
        throw ValidationError("auc: labels must be 0 or 1");
      }
      ++j;
    }
    wins += group_pos * negatives;
    ties += group_pos * group_neg;
    positives += group_pos;
    negatives += group_neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) throw ValidationError("auc undefined: need both positive and negative labels");
  return static_cast<double>(2 * wins + ties) / static_cast<double>(2 * positives * negatives);
}

double mean_logloss(std::span<const double> logits, std::span<const int> labels) {
  if (logits.empty() || logits.size() != labels.size()) throw ValidationError("mean_logloss: bad input lengths");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += ops::logloss_from_logit(logits[i], labels[i]);
  return total / static_cast<double>(logits.size());
}

MetricReport metric_report(std::span<const double> logits, std::span<const int> labels) {
  return {auc(logits, labels), mean_logloss(logits, labels), logits.size()};
}

std::string metric_json(const MetricReport& report, const std::string& split) {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["auc"] = report.auc;
  j["logloss"] = report.logloss;
  j["count"] = report.count;
  return j.dump();
}

double statistics_auc(const Dataset& data, std::span<const std::size_t> train_rows,
                      std::span<const std::size_t> test_rows, const InteractionTuple& tuple) {
  for (auto f : tuple.fields()) {
    if (f >= data.field_count()) throw ValidationError("statistics_auc: tuple field out of range");
  }
  if (train_rows.empty()) throw ValidationError("statistics_auc: empty training rows");
  // Key: per field the id list, separated by a sentinel.
  auto key_of = [&](std::size_t row) {
    std::vector<FeatureId> key;
    for (auto f : tuple.fields()) {
      const auto ids = data.ids(row, f);
      key.insert(key.end(), ids.begin(), ids.end());
      key.push_back(static_cast<FeatureId>(-1));
    }
    return key;
  };
  std::map<std::vector<FeatureId>, std::pair<std::uint64_t, std::uint64_t>> table;  // impressions, clicks
  std::uint64_t clicks = 0;
  for (auto row : train_rows) {
    auto& cell = table[key_of(row)];
    cell.first += 1;
    cell.second += static_cast<std::uint64_t>(data.label(row));
    clicks += static_cast<std::uint64_t>(data.label(row));
  }
  const double global_ctr = static_cast<double>(clicks) / static_cast<double>(train_rows.size());
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(test_rows.size());
  for (auto row : test_rows) {
    const auto it = table.find(key_of(row));
    scores.push_back(it == table.end() ? global_ctr
                                       : static_cast<double>(it->second.second) / static_cast<double>(it->second.first));
    labels.push_back(data.label(row));
  }
  return auc(scores, labels);
}

}  // namespace aim
