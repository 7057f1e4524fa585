#pragma once

// Synthetic click data with planted interaction tuples.
//
// Each field draws a token uniformly from its vocabulary. The logit is
//   bias + sum_f w_f[x_f] + sum_planted c_q * <u_{q1}[x_{q1}], u_{q2}[x_{q2}]> / sqrt(rank)
// with per-field token weights w ~ N(0, first_order_scale^2), factor vectors
// u ~ N(0, I_rank), and the bias calibrated by bisection so that the mean
// click probability equals positive_ratio.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aim/data.hpp"
#include "aim/interactions.hpp"
#include "json.hpp"

namespace aim {

struct SynthConfig {
  std::size_t fields = 10;
  std::size_t vocab = 20;  // tokens per field, excluding OOV
  std::size_t planted = 5;
  std::size_t order = 2;
  std::size_t rows = 100000;
  std::size_t rank = 4;
  double interaction_scale = 1.5;
  double first_order_scale = 0.2;
  double positive_ratio = 0.3;
  // The last noise_fields fields carry no signal at all.
  std::size_t noise_fields = 0;
  // When set, every planted tuple contains this 0-based field.
  bool use_hub = false;
  std::size_t hub = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PlantedTuple {
  InteractionTuple tuple;
  double coefficient = 0.0;
};

struct SynthResult {
  Dataset data;
  std::vector<PlantedTuple> planted;
  double bias = 0.0;
  double expected_ratio = 0.0;   // mean click probability after calibration
  double empirical_ratio = 0.0;  // fraction of positive labels drawn

  nlohmann::ordered_json manifest(const SynthConfig& config) const;
};

SynthResult generate_synthetic(const SynthConfig& config);

// Writes the data as svm-light (token k of field f written as f+1:k) and the
// manifest as JSON.
void write_synthetic(const SynthConfig& config, const SynthResult& result, const std::string& data_path,
                     const std::string& manifest_path);

}  // namespace aim
