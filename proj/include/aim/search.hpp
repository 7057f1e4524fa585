#pragma once

// The three-stage pipeline: interaction/IF search with growing orders,
// embedding-dimension search over the survivors, and a re-train of the
// pruned architecture.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aim/artifact.hpp"
#include "aim/data.hpp"
#include "aim/metrics.hpp"
#include "aim/model.hpp"
#include "aim/parameter.hpp"

namespace aim {

struct StageOptions {
  std::size_t epochs = 1;
  OptimizerSettings optim;
};

struct SearchSettings {
  ModelConfig model;  // architecture searched over
  std::size_t batch_size = 256;
  std::uint64_t seed = 1;
  // GRDA step sizes large enough for the c * sqrt(gamma) * (t gamma)^mu band
  // to reach the initial gates within a few epochs of desk-scale data.
  StageOptions stage1{3, {{}, {0.3, 0.05, 0.6}}};  // epochs per interaction order
  StageOptions stage2{3, {{}, {0.6, 0.05, 0.6}}};
  StageOptions retrain{5, {}};
  Head retrain_head = Head::fm;
  std::vector<std::size_t> retrain_mlp_widths = {700, 700, 700, 700, 700};

  void validate() const;
  // Search config with the re-train head and MLP substituted.
  ModelConfig retrain_model() const;
};

struct EpochRecord {
  std::string stage;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  bool has_valid = false;
  MetricReport valid;
  std::size_t open_gates = 0;
};

struct OrderReport {
  std::size_t order = 0;
  std::size_t candidates = 0;  // tuples gated at this order
  std::size_t gates = 0;       // (tuple, IF) gates at this order
  std::size_t surviving_tuples = 0;
  std::size_t surviving_pairs = 0;
};

struct Stage1Result {
  Model model;
  std::vector<SelectedPair> survivors;  // sorted by |alpha|
  std::vector<OrderReport> orders;
  std::vector<EpochRecord> epochs;
};

struct Stage2Result {
  Model model;
  std::vector<std::vector<std::size_t>> retained;  // phi per field, 0-based
  std::vector<EpochRecord> epochs;
};

struct Stage3Result {
  Model model;  // restored to the best-validation epoch
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool has_test = false;
  MetricReport test;
};

Stage1Result run_stage1(const Dataset& data, const SearchSettings& settings);

// Throws SearchCollapsed when every gated field loses all dimensions.
Stage2Result run_stage2(const Dataset& data, const std::vector<SelectedPair>& survivors,
                        const SearchSettings& settings);

// Drops pairs that touch a field with no retained dimensions (reported via
// removed when given) and sorts the rest by |alpha|.
SearchArtifact extract_artifact(const FieldSchema& schema, const std::vector<SelectedPair>& survivors,
                                const std::vector<std::vector<std::size_t>>& retained, const SearchSettings& settings,
                                std::vector<SelectedPair>* removed = nullptr);

// Every pair under every configured IF with alpha = 1/m and all dimensions.
SearchArtifact identity_artifact(const FieldSchema& schema, const ModelConfig& config);

// Re-trains under settings.retrain_head; the artifact's schema must match.
Stage3Result run_stage3(const Dataset& data, const SearchArtifact& artifact, const SearchSettings& settings);

// Builds the (untrained) re-train model for an artifact.
Model build_retrain_model(const FieldSchema& schema, const SearchArtifact& artifact, const ModelConfig& config,
                          std::uint64_t seed);

// Closed-form scalar count of build_retrain_model(schema, artifact, config).
std::size_t analytic_parameter_count(const FieldSchema& schema, const SearchArtifact& artifact,
                                     const ModelConfig& config);

// phi: positions of the nonzero entries of one field's beta row.
std::vector<std::size_t> retained_positions(std::span<const double> beta_row);

// Number of nonzero gates in an alpha or beta parameter.
std::size_t count_nonzero(const Tensor& values);

}  // namespace aim
