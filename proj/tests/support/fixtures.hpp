#pragma once

// Test-only helpers: random in-memory datasets and a central-difference
// gradient checker that never goes through the model's backward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "aim/data.hpp"
#include "aim/model.hpp"
#include "aim/rng.hpp"

namespace aim::testing {

// n fields with vocab sizes 3 + (f % 3) (OOV slot included), optionally
// making the last field multi-hot. Labels are fair coin flips.
inline Dataset random_dataset(std::size_t rows, std::size_t fields, std::uint64_t seed, bool multi_hot_last = false) {
  FieldSchema schema;
  for (std::size_t f = 0; f < fields; ++f) {
    schema.vocab_sizes.push_back(3 + f % 3);
    schema.multi_hot.push_back(multi_hot_last && f + 1 == fields);
  }
  Rng rng(seed);
  std::vector<Instance> instances(rows);
  for (auto& inst : instances) {
    inst.label = static_cast<int>(rng.below(2));
    inst.ids.resize(fields);
    for (std::size_t f = 0; f < fields; ++f) {
      const std::size_t count = schema.multi_hot[f] ? 1 + rng.below(3) : 1;
      for (std::size_t c = 0; c < count; ++c) {
        inst.ids[f].push_back(static_cast<FeatureId>(rng.below(schema.vocab_sizes[f])));
      }
    }
  }
  // Guarantee both classes.
  instances[0].label = 0;
  instances[1].label = 1;
  return Dataset::from_instances(schema, instances);
}

inline std::vector<std::size_t> first_rows(std::size_t count) {
  std::vector<std::size_t> rows(count);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Relative error with a small floor on the denominator so that entries whose
// true gradient is numerically zero are judged on absolute error.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// Compares analytic gradients of the train-mode mean batch loss against
// central differences for every scalar of every non-frozen parameter.
inline GradCheckResult check_model_gradients(Model& model, const Dataset& data, const std::vector<std::size_t>& rows,
                                             double h = 1e-5) {
  model.params().zero_grad();
  auto pass = model.forward(data, rows, Mode::train, false);
  model.backward(pass);
  GradCheckResult result;
  for (auto& param : model.params()) {
    for (std::size_t i = 0; i < param->value.size(); ++i) {
      const double saved = param->value[i];
      param->value[i] = saved + h;
      const double up = model.loss(data, rows, Mode::train);
      param->value[i] = saved - h;
      const double down = model.loss(data, rows, Mode::train);
      param->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(param->grad[i], numeric);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = param->name() + "[" + std::to_string(i) + "] analytic=" + std::to_string(param->grad[i]) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  model.params().zero_grad();
  return result;
}

}  // namespace aim::testing
