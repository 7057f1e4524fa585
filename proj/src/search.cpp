#include "aim/search.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include "aim/error.hpp"
#include "aim/rng.hpp"
#include "aim/train.hpp"

namespace aim {

namespace {

void validate_stage(const StageOptions& stage, const char* name) {
  if (stage.epochs == 0) throw ConfigError(std::string(name) + ": epochs must be positive");
  if (!(stage.optim.adam.lr > 0.0)) throw ConfigError(std::string(name) + ": adam_lr must be positive");
  if (!(stage.optim.grda.lr > 0.0)) throw ConfigError(std::string(name) + ": grda_lr must be positive");
  if (!(stage.optim.grda.c >= 0.0)) throw ConfigError(std::string(name) + ": grda_c must be non-negative");
  if (!(stage.optim.grda.mu > 0.0 && stage.optim.grda.mu < 1.0)) {
    throw ConfigError(std::string(name) + ": grda_mu must be in (0,1)");
  }
}

bool both_classes(const Dataset& data, const std::vector<std::size_t>& rows) {
  bool pos = false, neg = false;
  for (auto r : rows) (data.label(r) ? pos : neg) = true;
  return pos && neg;
}

std::optional<MetricReport> try_evaluate(Model& model, const Dataset& data, const std::vector<std::size_t>& rows) {
  if (!both_classes(data, rows)) return std::nullopt;
  return evaluate(model, data, rows);
}

std::size_t open_alpha_gates(const Model& model) {
  std::size_t open = 0;
  for (const auto& t : model.terms()) open += model.alpha(t) != 0.0;
  return open;
}

EpochRecord record(const char* stage, std::size_t epoch, const EpochStats& stats,
                   const std::optional<MetricReport>& valid, std::size_t open) {
  EpochRecord r;
  r.stage = stage;
  r.epoch = epoch;
  r.train_loss = stats.mean_loss;
  r.has_valid = valid.has_value();
  if (valid) r.valid = *valid;
  r.open_gates = open;
  return r;
}

std::vector<std::size_t> training_rows(const Dataset& data) {
  auto rows = data.indices(Split::train);
  if (rows.empty()) throw ValidationError("the training split is empty");
  return rows;
}

// FNV-1a over a canonical JSON dump.
std::string hash_text(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::ordered_json stage_json(const StageOptions& s) {
  nlohmann::ordered_json j;
  j["epochs"] = s.epochs;
  j["adam_lr"] = s.optim.adam.lr;
  j["grda_lr"] = s.optim.grda.lr;
  j["grda_c"] = s.optim.grda.c;
  j["grda_mu"] = s.optim.grda.mu;
  return j;
}

nlohmann::ordered_json settings_json(const SearchSettings& s) {
  nlohmann::ordered_json j;
  j["head"] = head_name(s.model.head);
  j["max_order"] = s.model.max_order;
  auto kinds = nlohmann::ordered_json::array();
  for (auto k : s.model.kinds) kinds.push_back(if_kind_name(k));
  j["kinds"] = kinds;
  j["embedding_dim"] = s.model.embedding_dim;
  j["mlp_widths"] = s.model.mlp_widths;
  j["embedding_mode"] = embedding_mode_name(s.model.embedding_mode);
  j["batch_norm"] = s.model.batch_norm;
  j["batch_size"] = s.batch_size;
  j["seed"] = s.seed;
  j["stage1"] = stage_json(s.stage1);
  j["stage2"] = stage_json(s.stage2);
  return j;
}

// Re-train config: kinds the artifact needs but the config lacks are
// appended so slot assignment for configured kinds is unchanged.
ModelConfig fit_config(const SearchArtifact& artifact, ModelConfig config) {
  config.embedding_dim = artifact.embedding_dim;
  for (const auto& p : artifact.pairs) {
    config.max_order = std::max(config.max_order, p.tuple.order());
    if (std::find(config.kinds.begin(), config.kinds.end(), p.kind) == config.kinds.end()) {
      config.kinds.push_back(p.kind);
    }
  }
  return config;
}

}  // namespace

void SearchSettings::validate() const {
  model.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  validate_stage(stage1, "stage1");
  validate_stage(stage2, "stage2");
  validate_stage(retrain, "retrain");
  retrain_model().validate();
}

ModelConfig SearchSettings::retrain_model() const {
  ModelConfig config = model;
  config.head = retrain_head;
  config.mlp_widths = retrain_mlp_widths;
  return config;
}

std::vector<std::size_t> retained_positions(std::span<const double> beta_row) {
  std::vector<std::size_t> phi;
  for (std::size_t k = 0; k < beta_row.size(); ++k) {
    if (beta_row[k] != 0.0) phi.push_back(k);
  }
  return phi;
}

std::size_t count_nonzero(const Tensor& values) {
  std::size_t count = 0;
  for (double v : values.values()) count += v != 0.0;
  return count;
}

Stage1Result run_stage1(const Dataset& data, const SearchSettings& settings) {
  settings.validate();
  const auto& schema = data.schema();
  const std::size_t n = schema.field_count();
  if (n < 2) throw ValidationError("interaction search needs at least two fields");
  const auto train = training_rows(data);
  const auto valid = data.indices(Split::valid);
  const auto& kinds = settings.model.kinds;

  Architecture arch;
  arch.alpha_tag = OptimizerTag::grda;
  const auto pairs = enumerate_second_order(n);
  for (const auto& tuple : pairs) {
    for (auto kind : kinds) arch.terms.push_back({tuple, kind});
  }
  Model model(schema, settings.model, arch, mix_seed(settings.seed, 11));
  std::vector<OrderReport> orders{{2, pairs.size(), arch.terms.size(), 0, 0}};
  const BatchStream stream(train, settings.batch_size, mix_seed(settings.seed, 12));

  std::vector<std::size_t> singles(n);
  for (std::size_t f = 0; f < n; ++f) singles[f] = f;

  std::vector<EpochRecord> records;
  std::size_t epoch = 0;
  for (std::size_t p = 2; p <= settings.model.max_order; ++p) {
    if (p > 2) {
      std::map<InteractionTuple, double> score;
      for (const auto& term : model.terms()) {
        if (term.tuple.order() != p - 1) continue;
        auto& s = score[term.tuple];
        s = std::max(s, std::abs(model.alpha(term)));
      }
      std::vector<std::pair<InteractionTuple, double>> scored;
      for (const auto& [tuple, s] : score) {
        if (s > 0.0) scored.emplace_back(tuple, s);
      }
      const auto top = top_k_by_alpha(scored, n / 2);
      const auto pool = combine(top, singles);
      std::vector<TermSpec> specs;
      for (const auto& tuple : pool) {
        for (auto kind : kinds) {
          if (kind != IfKind::kernel_matrix) specs.push_back({tuple, kind});
        }
      }
      if (specs.empty()) break;
      model.add_terms(specs, OptimizerTag::grda);
      orders.push_back({p, pool.size(), specs.size(), 0, 0});
    }
    for (std::size_t e = 0; e < settings.stage1.epochs; ++e, ++epoch) {
      const auto stats = train_epoch(model, data, stream, epoch, settings.stage1.optim);
      records.push_back(record("search_interaction_if", epoch, stats, try_evaluate(model, data, valid),
                               open_alpha_gates(model)));
    }
  }

  std::vector<SelectedPair> survivors;
  std::vector<std::set<InteractionTuple>> tuples(orders.size());
  for (const auto& term : model.terms()) {
    const double a = model.alpha(term);
    if (a == 0.0) continue;
    survivors.push_back({term.tuple, term.kind, a});
    const std::size_t slot = term.tuple.order() - 2;
    orders[slot].surviving_pairs += 1;
    tuples[slot].insert(term.tuple);
  }
  for (std::size_t i = 0; i < orders.size(); ++i) orders[i].surviving_tuples = tuples[i].size();
  sort_pairs(survivors);
  return {std::move(model), std::move(survivors), std::move(orders), std::move(records)};
}

Stage2Result run_stage2(const Dataset& data, const std::vector<SelectedPair>& survivors,
                        const SearchSettings& settings) {
  settings.validate();
  const auto& schema = data.schema();
  const std::size_t n = schema.field_count();
  const auto train = training_rows(data);
  const auto valid = data.indices(Split::valid);

  Architecture arch;
  for (const auto& p : survivors) arch.terms.push_back({p.tuple, p.kind, p.alpha});
  arch.alpha_tag = OptimizerTag::frozen;
  arch.dimension_gates = true;
  arch.beta_tag = OptimizerTag::grda;
  Model model(schema, settings.model, arch, mix_seed(settings.seed, 21));
  const BatchStream stream(train, settings.batch_size, mix_seed(settings.seed, 22));

  std::vector<EpochRecord> records;
  const auto& beta = model.params().find("beta")->value;
  for (std::size_t e = 0; e < settings.stage2.epochs; ++e) {
    const auto stats = train_epoch(model, data, stream, e, settings.stage2.optim);
    records.push_back(record("search_embed", e, stats, try_evaluate(model, data, valid), count_nonzero(beta)));
  }

  // Fields that feed no interaction and no MLP carry no embedding at all.
  std::vector<bool> used(n, settings.model.has_mlp());
  for (const auto& p : survivors) {
    for (auto f : p.tuple.fields()) used[f] = true;
  }
  std::vector<std::vector<std::size_t>> retained(n);
  bool any_used = false, any_open = false;
  for (std::size_t f = 0; f < n; ++f) {
    if (!used[f]) continue;
    any_used = true;
    retained[f] = retained_positions(beta.row(f));
    any_open |= !retained[f].empty();
  }
  if (any_used && !any_open) throw SearchCollapsed();
  return {std::move(model), std::move(retained), std::move(records)};
}

SearchArtifact extract_artifact(const FieldSchema& schema, const std::vector<SelectedPair>& survivors,
                                const std::vector<std::vector<std::size_t>>& retained, const SearchSettings& settings,
                                std::vector<SelectedPair>* removed) {
  if (retained.size() != schema.field_count()) throw ValidationError("retained sets must cover every field");
  SearchArtifact artifact;
  artifact.schema_hash = schema.hash();
  artifact.embedding_dim = settings.model.embedding_dim;
  artifact.retained = retained;
  for (const auto& p : survivors) {
    const bool dead = std::any_of(p.tuple.fields().begin(), p.tuple.fields().end(),
                                  [&](std::size_t f) { return retained[f].empty(); });
    if (dead) {
      if (removed) removed->push_back(p);
      continue;
    }
    artifact.pairs.push_back(p);
  }
  sort_pairs(artifact.pairs);
  const auto config = settings_json(settings);
  artifact.provenance["config_hash"] = hash_text(config.dump());
  artifact.provenance["seed"] = settings.seed;
  artifact.provenance["search_head"] = head_name(settings.model.head);
  artifact.provenance["stage_epochs"] = {{"search_interaction_if", settings.stage1.epochs},
                                         {"search_embed", settings.stage2.epochs}};
  artifact.provenance["config"] = config;
  artifact.validate(&schema);
  return artifact;
}

SearchArtifact identity_artifact(const FieldSchema& schema, const ModelConfig& config) {
  SearchArtifact artifact;
  artifact.schema_hash = schema.hash();
  artifact.embedding_dim = config.embedding_dim;
  const double alpha = 1.0 / static_cast<double>(config.kinds.size());
  for (const auto& tuple : enumerate_second_order(schema.field_count())) {
    for (auto kind : config.kinds) artifact.pairs.push_back({tuple, kind, alpha});
  }
  artifact.retained.assign(schema.field_count(), {});
  for (auto& r : artifact.retained) {
    for (std::size_t k = 0; k < config.embedding_dim; ++k) r.push_back(k);
  }
  artifact.provenance["identity"] = true;
  artifact.validate(&schema);
  return artifact;
}

Model build_retrain_model(const FieldSchema& schema, const SearchArtifact& artifact, const ModelConfig& config,
                          std::uint64_t seed) {
  artifact.validate(&schema);
  Architecture arch;
  for (const auto& p : artifact.pairs) arch.terms.push_back({p.tuple, p.kind, p.alpha});
  arch.alpha_tag = OptimizerTag::adam;
  arch.retained = artifact.retained;
  arch.dimension_gates = false;
  return Model(schema, fit_config(artifact, config), arch, seed);
}

std::size_t analytic_parameter_count(const FieldSchema& schema, const SearchArtifact& artifact,
                                     const ModelConfig& config) {
  const std::size_t n = schema.field_count();
  const std::size_t d = artifact.embedding_dim;
  const bool mlp = config.has_mlp();
  std::size_t total = 0;
  if (config.head != Head::ipnn) {
    for (auto h : schema.vocab_sizes) total += h;
    total += 1;
  }
  std::size_t embedding_width = 0;
  for (std::size_t f = 0; f < n; ++f) {
    const std::size_t d_i = artifact.dims(f);
    embedding_width += d_i;
    if (d_i == 0) continue;
    std::set<IfKind> tables;
    for (const auto& p : artifact.pairs) {
      if (p.tuple.contains(f)) tables.insert(config.embedding_mode == EmbeddingMode::shared ? IfKind::inner : p.kind);
    }
    if (mlp) tables.insert(config.embedding_mode == EmbeddingMode::shared ? IfKind::inner : config.kinds.front());
    total += tables.size() * schema.vocab_sizes[f] * d_i;
  }
  total += artifact.pairs.size();
  for (const auto& p : artifact.pairs) total += if_param_count(p.kind, p.tuple.order(), d);
  if (mlp) {
    std::size_t in = embedding_width + (config.head == Head::ipnn ? artifact.pairs.size() : 0);
    for (auto w : config.mlp_widths) {
      total += in * w + w;
      in = w;
    }
    total += in + 1;
  }
  return total;
}

Stage3Result run_stage3(const Dataset& data, const SearchArtifact& artifact, const SearchSettings& settings) {
  settings.validate();
  const auto train = training_rows(data);
  const auto valid = data.indices(Split::valid);
  const auto test = data.indices(Split::test);
  Model model = build_retrain_model(data.schema(), artifact, settings.retrain_model(), mix_seed(settings.seed, 31));
  const BatchStream stream(train, settings.batch_size, mix_seed(settings.seed, 32));

  std::vector<EpochRecord> records;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::vector<Parameter> best_params;
  std::vector<BnState> best_bn;
  auto capture = [&] {
    best_params.clear();
    for (const auto& p : model.params()) best_params.push_back(*p);
    best_bn.clear();
    for (const auto& t : model.terms()) best_bn.push_back(t.bn);
  };
  for (std::size_t e = 0; e < settings.retrain.epochs; ++e) {
    const auto stats = train_epoch(model, data, stream, e, settings.retrain.optim);
    const auto report = try_evaluate(model, data, valid);
    records.push_back(record("retrain", e, stats, report, open_alpha_gates(model)));
    if (report ? report->logloss < best : e + 1 == settings.retrain.epochs && best_params.empty()) {
      if (report) best = report->logloss;
      best_epoch = e;
      capture();
    }
  }
  std::size_t i = 0;
  for (auto& p : model.params()) *p = best_params[i++];
  for (std::size_t t = 0; t < model.terms().size(); ++t) model.terms()[t].bn = best_bn[t];

  Stage3Result result{std::move(model), std::move(records), best_epoch, false, {}};
  if (const auto report = try_evaluate(result.model, data, test)) {
    result.has_test = true;
    result.test = *report;
  }
  return result;
}

}  // namespace aim
