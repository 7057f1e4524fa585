#pragma once

// Gated factorization model: function-wise (or shared) embeddings with
// optional per-field dimension gates (beta), an interaction layer of gated
// (tuple, IF) terms with fixed-affine batch normalization, a linear term,
// and an FM / DeepFM / IPNN output head. Forward and backward passes are
// written out by hand and work on whole mini-batches.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aim/batchnorm.hpp"
#include "aim/data.hpp"
#include "aim/interactions.hpp"
#include "aim/mlp.hpp"
#include "aim/parameter.hpp"
#include "aim/rng.hpp"

namespace aim {

enum class Head { fm, deepfm, ipnn };
enum class EmbeddingMode { function_wise, shared };

const char* head_name(Head head);
Head parse_head(std::string_view name);
const char* embedding_mode_name(EmbeddingMode mode);
EmbeddingMode parse_embedding_mode(std::string_view name);

struct ModelConfig {
  Head head = Head::fm;
  std::size_t max_order = 2;
  std::vector<IfKind> kinds = default_if_kinds();
  std::size_t embedding_dim = 40;
  std::vector<std::size_t> mlp_widths = {700, 700, 700, 700, 700};
  EmbeddingMode embedding_mode = EmbeddingMode::function_wise;
  bool batch_norm = true;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;
  double embedding_init_std = 0.01;

  bool has_mlp() const { return head != Head::fm; }
  // Embedding table slot used by kind (0 for shared embeddings).
  std::size_t slot_of(IfKind kind) const;
  std::size_t slot_count() const;
  void validate() const;
};

struct TermSpec {
  InteractionTuple tuple;
  IfKind kind = IfKind::inner;
  // Initial gate value; NaN selects 1/m where m is the configured IF count.
  double alpha = std::numeric_limits<double>::quiet_NaN();
};

struct Architecture {
  std::vector<TermSpec> terms;
  // Retained embedding positions per field (0-based, strictly increasing).
  // Empty means every field keeps all embedding_dim positions; an empty
  // inner list drops the field's embeddings entirely.
  std::vector<std::vector<std::size_t>> retained;
  bool dimension_gates = false;
  OptimizerTag alpha_tag = OptimizerTag::grda;
  OptimizerTag beta_tag = OptimizerTag::grda;
};

struct Term {
  InteractionTuple tuple;
  IfKind kind;
  std::size_t slot;
  ParameterStore::Id alpha_param;
  std::size_t alpha_index;
  ParameterStore::Id if_params;  // kNoParam when the kind has none
  BnState bn;
};

inline constexpr ParameterStore::Id kNoParam = static_cast<ParameterStore::Id>(-1);

// Everything a backward pass needs from the forward pass of one batch.
struct ForwardPass {
  Mode mode = Mode::eval;
  const Dataset* data = nullptr;
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  std::vector<double> pooled;       // batch x fields x slots x d, ungated, zero off the retained set
  std::vector<double> embedded;     // same layout, gated by beta
  std::vector<double> raw;          // terms x batch, IF outputs
  std::vector<double> normalized;   // terms x batch, after BN (== raw without BN)
  std::vector<double> gated;        // terms x batch, alpha * normalized
  std::vector<double> interaction;  // per row: linear term + sum of gated terms (l)
  std::vector<double> mlp_input;
  MlpHead::Cache mlp_cache;
  std::vector<double> logits;
  double mean_loss = 0.0;
  std::uint64_t structure_version = 0;
  bool consumed = false;
};

class Model {
 public:
  Model(FieldSchema schema, ModelConfig config, Architecture arch, std::uint64_t seed);

  const FieldSchema& schema() const { return schema_; }
  const ModelConfig& config() const { return config_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::vector<Term>& terms() { return terms_; }
  const std::vector<std::vector<std::size_t>>& retained() const { return retained_; }
  bool dimension_gates() const { return beta_ != kNoParam; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  std::size_t parameter_count() const { return store_.scalar_count(); }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  // Adds a new gate group (one alpha tensor) holding the given terms.
  ParameterStore::Id add_terms(std::span<const TermSpec> specs, OptimizerTag alpha_tag);

  double alpha(const Term& term) const { return store_[term.alpha_param].value[term.alpha_index]; }
  // Row of beta for field (all ones when dimension gates are off).
  std::vector<double> beta(std::size_t field) const;
  ParameterStore::Id table_id(std::size_t field, std::size_t slot) const { return tables_[field][slot]; }

  // Widened, gated embeddings e'_i for every field under kind's table.
  std::vector<std::vector<double>> embed(const Dataset& data, std::size_t row, IfKind kind) const;

  ForwardPass forward(const Dataset& data, std::span<const std::size_t> rows, Mode mode, bool update_running = true);
  // Accumulates d(mean batch loss) into every parameter's grad.
  void backward(ForwardPass& pass);

  // Train-mode forward (updating BN running stats) followed by backward.
  double accumulate_gradients(const Dataset& data, std::span<const std::size_t> rows);
  // Mean batch loss without touching running statistics.
  double loss(const Dataset& data, std::span<const std::size_t> rows, Mode mode);
  // Eval-mode logits, computed in chunks.
  std::vector<double> predict_logits(const Dataset& data, std::span<const std::size_t> rows);

 private:
  void allocate_table(std::size_t field, std::size_t slot);
  std::size_t mlp_embedding_width() const;
  std::size_t cell(std::size_t b, std::size_t field, std::size_t slot) const {
    return ((b * schema_.field_count() + field) * slots_ + slot) * dim_;
  }

  FieldSchema schema_;
  ModelConfig config_;
  std::size_t dim_;
  std::size_t slots_;
  std::vector<std::vector<std::size_t>> retained_;
  ParameterStore store_;
  Rng rng_;
  std::vector<std::vector<ParameterStore::Id>> tables_;  // [field][slot]
  std::vector<ParameterStore::Id> linear_;                // per field
  ParameterStore::Id bias_ = kNoParam;
  ParameterStore::Id beta_ = kNoParam;
  std::vector<Term> terms_;
  MlpHead mlp_;
  std::size_t alpha_groups_ = 0;
  std::uint64_t structure_version_ = 0;
};

}  // namespace aim
