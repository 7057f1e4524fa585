#include "aim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "aim/error.hpp"
#include "aim/ops.hpp"
#include "aim/rng.hpp"

namespace aim {

void SynthConfig::validate() const {
  if (fields < 2) throw ConfigError("synth: at least two fields are required");
  if (vocab < 1) throw ConfigError("synth: vocab must be positive");
  if (rows < 2) throw ConfigError("synth: at least two rows are required");
  if (rank < 1) throw ConfigError("synth: rank must be positive");
  if (order < 2 || order > kMaxOrder) throw ConfigError("synth: order must be in [2, 8]");
  if (!(positive_ratio > 0.0 && positive_ratio < 1.0)) throw ConfigError("synth: positive_ratio must be in (0,1)");
  if (noise_fields >= fields) throw ConfigError("synth: noise_fields must leave at least one signal field");
  const std::size_t signal = fields - noise_fields;
  if (use_hub && hub >= signal) throw ConfigError("synth: hub must be a signal field");
  if (planted > 0 && signal < order) throw ConfigError("synth: not enough signal fields for the planted order");
  // Number of distinct tuples available.
  double available = 1.0;
  const std::size_t free = use_hub ? signal - 1 : signal;
  const std::size_t pick = use_hub ? order - 1 : order;
  for (std::size_t i = 0; i < pick; ++i) available = available * static_cast<double>(free - i) / static_cast<double>(i + 1);
  if (static_cast<double>(planted) > available) throw ConfigError("synth: more planted tuples than distinct tuples");
}

SynthResult generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t n = config.fields;
  const std::size_t signal = n - config.noise_fields;

  std::set<InteractionTuple> chosen;
  std::vector<PlantedTuple> planted;
  while (planted.size() < config.planted) {
    std::vector<std::size_t> pool;
    for (std::size_t f = 0; f < signal; ++f) {
      if (!(config.use_hub && f == config.hub)) pool.push_back(f);
    }
    rng.shuffle(std::span<std::size_t>(pool));
    std::vector<std::size_t> fields;
    if (config.use_hub) fields.push_back(config.hub);
    for (std::size_t i = 0; fields.size() < config.order; ++i) fields.push_back(pool[i]);
    InteractionTuple tuple(fields);
    if (!chosen.insert(tuple).second) continue;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    planted.push_back({tuple, sign * config.interaction_scale});
  }

  // Token weights and factor vectors, indexed [field][token-1].
  std::vector<std::vector<double>> weights(n, std::vector<double>(config.vocab, 0.0));
  std::vector<std::vector<std::vector<double>>> factors(
      n, std::vector<std::vector<double>>(config.vocab, std::vector<double>(config.rank, 0.0)));
  for (std::size_t f = 0; f < signal; ++f) {
    for (auto& w : weights[f]) w = rng.normal(0.0, config.first_order_scale);
    for (auto& u : factors[f]) {
      for (auto& x : u) x = rng.normal();
    }
  }

  std::vector<std::vector<FeatureId>> tokens(config.rows, std::vector<FeatureId>(n));
  std::vector<double> logits(config.rows, 0.0);
  const double norm = 1.0 / std::sqrt(static_cast<double>(config.rank));
  for (std::size_t r = 0; r < config.rows; ++r) {
    for (std::size_t f = 0; f < n; ++f) tokens[r][f] = static_cast<FeatureId>(1 + rng.below(config.vocab));
    double z = 0.0;
    for (std::size_t f = 0; f < n; ++f) z += weights[f][tokens[r][f] - 1];
    for (const auto& p : planted) {
      const auto& fs = p.tuple.fields();
      double acc = 0.0;
      for (std::size_t k = 0; k < config.rank; ++k) {
        double prod = 1.0;
        for (auto f : fs) prod *= factors[f][tokens[r][f] - 1][k];
        acc += prod;
      }
      z += p.coefficient * acc * norm;
    }
    logits[r] = z;
  }

  auto mean_prob = [&](double bias) {
    double total = 0.0;
    for (double z : logits) total += ops::sigmoid(z + bias);
    return total / static_cast<double>(logits.size());
  };
  double lo = -50.0, hi = 50.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_prob(mid) < config.positive_ratio ? lo : hi) = mid;
  }
  const double bias = 0.5 * (lo + hi);

  FieldSchema schema;
  schema.vocab_sizes.assign(n, config.vocab + 1);
  schema.multi_hot.assign(n, false);
  Vocabulary vocabulary(n);
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t k = 1; k <= config.vocab; ++k) vocabulary.intern(f, std::to_string(k));
  }
  std::vector<Instance> instances(config.rows);
  std::size_t positives = 0;
  for (std::size_t r = 0; r < config.rows; ++r) {
    instances[r].label = rng.uniform() < ops::sigmoid(logits[r] + bias) ? 1 : 0;
    positives += static_cast<std::size_t>(instances[r].label);
    instances[r].ids.resize(n);
    for (std::size_t f = 0; f < n; ++f) instances[r].ids[f] = {tokens[r][f]};
  }

  SynthResult result{Dataset::from_instances(schema, instances, std::move(vocabulary)), std::move(planted), bias,
                     mean_prob(bias), static_cast<double>(positives) / static_cast<double>(config.rows)};
  return result;
}

nlohmann::ordered_json SynthResult::manifest(const SynthConfig& config) const {
  nlohmann::ordered_json doc;
  doc["seed"] = config.seed;
  doc["fields"] = config.fields;
  doc["vocab"] = config.vocab;
  doc["rows"] = config.rows;
  doc["rank"] = config.rank;
  doc["positive_ratio"] = config.positive_ratio;
  doc["expected_ratio"] = expected_ratio;
  doc["empirical_ratio"] = empirical_ratio;
  doc["bias"] = bias;
  auto list = nlohmann::ordered_json::array();
  for (const auto& p : planted) {
    auto fields = nlohmann::ordered_json::array();
    for (auto f : p.tuple.fields()) fields.push_back(f + 1);
    list.push_back({{"fields", fields}, {"coefficient", p.coefficient}});
  }
  doc["planted"] = list;
  auto noise = nlohmann::ordered_json::array();
  for (std::size_t f = config.fields - config.noise_fields; f < config.fields; ++f) noise.push_back(f + 1);
  doc["noise_fields"] = noise;
  return doc;
}

void write_synthetic(const SynthConfig& config, const SynthResult& result, const std::string& data_path,
                     const std::string& manifest_path) {
  std::ofstream out(data_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + data_path + "'");
  const auto& data = result.data;
  std::string line;
  for (std::size_t r = 0; r < data.size(); ++r) {
    line.clear();
    line += data.label(r) ? '1' : '0';
    for (std::size_t f = 0; f < data.field_count(); ++f) {
      line += ' ';
      line += std::to_string(f + 1);
      line += ':';
      line += data.vocabulary().token(f, data.ids(r, f)[0]);
    }
    line += '\n';
    out << line;
  }
  std::ofstream manifest(manifest_path, std::ios::binary);
  if (!manifest) throw ConfigError("cannot write '" + manifest_path + "'");
  manifest << result.manifest(config).dump(2) << "\n";
}

}  // namespace aim
