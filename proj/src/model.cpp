#include "aim/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "aim/error.hpp"
#include "aim/ops.hpp"

namespace aim {

const char* head_name(Head head) {
  switch (head) {
    case Head::fm: return "fm";
    case Head::deepfm: return "deepfm";
    case Head::ipnn: return "ipnn";
  }
  return "?";
}

Head parse_head(std::string_view name) {
  if (name == "fm") return Head::fm;
  if (name == "deepfm") return Head::deepfm;
  if (name == "ipnn") return Head::ipnn;
  throw ConfigError("unknown head '" + std::string(name) + "'");
}

const char* embedding_mode_name(EmbeddingMode mode) {
  return mode == EmbeddingMode::function_wise ? "function_wise" : "shared";
}

EmbeddingMode parse_embedding_mode(std::string_view name) {
  if (name == "function_wise" || name == "fwe") return EmbeddingMode::function_wise;
  if (name == "shared") return EmbeddingMode::shared;
  throw ConfigError("unknown embedding mode '" + std::string(name) + "'");
}

std::size_t ModelConfig::slot_of(IfKind kind) const {
  if (embedding_mode == EmbeddingMode::shared) return 0;
  const auto it = std::find(kinds.begin(), kinds.end(), kind);
  if (it == kinds.end()) {
    throw ValidationError(std::string("interaction function ") + if_kind_name(kind) + " is not configured");
  }
  return static_cast<std::size_t>(it - kinds.begin());
}

std::size_t ModelConfig::slot_count() const {
  return embedding_mode == EmbeddingMode::shared ? 1 : kinds.size();
}

void ModelConfig::validate() const {
  if (max_order < 2 || max_order > kMaxOrder) throw ConfigError("max order must be in [2, 8]");
  if (kinds.empty()) throw ConfigError("at least one interaction function is required");
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    for (std::size_t j = i + 1; j < kinds.size(); ++j) {
      if (kinds[i] == kinds[j]) throw ConfigError("interaction functions must be distinct");
    }
  }
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
  if (has_mlp() && mlp_widths.empty()) throw ConfigError("deepfm and ipnn heads need MLP widths");
  if (bn_epsilon <= 0.0) throw ConfigError("bn_epsilon must be positive");
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("bn_momentum must be in (0,1)");
}

Model::Model(FieldSchema schema, ModelConfig config, Architecture arch, std::uint64_t seed)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      dim_(config_.embedding_dim),
      slots_(config_.slot_count()),
      rng_(seed) {
  schema_.validate();
  config_.validate();
  const std::size_t n = schema_.field_count();
  if (arch.retained.empty()) {
    retained_.assign(n, {});
    for (auto& r : retained_) {
      for (std::size_t k = 0; k < dim_; ++k) r.push_back(k);
    }
  } else {
    if (arch.retained.size() != n) throw ValidationError("retained position sets must cover every field");
    for (const auto& r : arch.retained) {
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (r[k] >= dim_ || (k > 0 && r[k] <= r[k - 1])) {
          throw ValidationError("retained positions must be strictly increasing and below embedding_dim");
        }
      }
    }
    retained_ = std::move(arch.retained);
  }

  tables_.assign(n, std::vector<ParameterStore::Id>(slots_, kNoParam));
  if (config_.head != Head::ipnn) {
    for (std::size_t f = 0; f < n; ++f) {
      linear_.push_back(store_.add("linear/" + std::to_string(f + 1), Tensor({schema_.vocab_sizes[f]}),
                                   OptimizerTag::adam));
    }
    bias_ = store_.add("bias", Tensor({1}), OptimizerTag::adam);
  }
  if (arch.dimension_gates) beta_ = store_.add("beta", Tensor({n, dim_}, 1.0), arch.beta_tag);
  if (config_.has_mlp()) {
    for (std::size_t f = 0; f < n; ++f) {
      if (!retained_[f].empty()) allocate_table(f, 0);
    }
  }
  if (!arch.terms.empty()) add_terms(arch.terms, arch.alpha_tag);
  if (config_.has_mlp()) {
    std::size_t width = mlp_embedding_width();
    if (config_.head == Head::ipnn) width += terms_.size();
    if (width == 0) throw ValidationError("MLP head has no inputs");
    mlp_ = MlpHead(store_, "mlp", width, config_.mlp_widths, rng_);
  }
}

void Model::allocate_table(std::size_t field, std::size_t slot) {
  if (tables_[field][slot] != kNoParam) return;
  const std::size_t width = retained_[field].size();
  if (width == 0) throw ValidationError("field " + std::to_string(field + 1) + " has no embedding dimensions");
  Tensor table({schema_.vocab_sizes[field], width});
  for (auto& v : table.values()) v = rng_.normal(0.0, config_.embedding_init_std);
  const std::string slot_name =
      config_.embedding_mode == EmbeddingMode::shared ? "shared" : if_kind_name(config_.kinds[slot]);
  tables_[field][slot] =
      store_.add("emb/" + std::to_string(field + 1) + "/" + slot_name, std::move(table), OptimizerTag::adam);
}

std::size_t Model::mlp_embedding_width() const {
  std::size_t width = 0;
  for (const auto& r : retained_) width += r.size();
  return width;
}

ParameterStore::Id Model::add_terms(std::span<const TermSpec> specs, OptimizerTag alpha_tag) {
  const std::size_t n = schema_.field_count();
  const double default_alpha = 1.0 / static_cast<double>(config_.kinds.size());
  Tensor alpha({std::max<std::size_t>(specs.size(), 1)});
  if (specs.empty()) return kNoParam;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    if (spec.tuple.order() > config_.max_order) throw ValidationError("interaction order exceeds max_order");
    if (spec.kind == IfKind::kernel_matrix && spec.tuple.order() != 2) {
      throw ValidationError("kernel_matrix is only defined for order 2");
    }
    for (auto f : spec.tuple.fields()) {
      if (f >= n) throw ValidationError("interaction field index out of range");
    }
    for (const auto& t : terms_) {
      if (t.tuple == spec.tuple && t.kind == spec.kind) throw ValidationError("duplicate interaction term");
    }
    alpha[i] = std::isnan(spec.alpha) ? default_alpha : spec.alpha;
  }
  const auto alpha_id = store_.add("alpha/" + std::to_string(alpha_groups_++), std::move(alpha), alpha_tag);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    const std::size_t slot = config_.slot_of(spec.kind);
    for (auto f : spec.tuple.fields()) allocate_table(f, slot);
    Term term{spec.tuple, spec.kind, slot, alpha_id, i, kNoParam, {}};
    term.bn.epsilon = config_.bn_epsilon;
    term.bn.momentum = config_.bn_momentum;
    const std::size_t count = if_param_count(spec.kind, spec.tuple.order(), dim_);
    if (count > 0) {
      Tensor p({count});
      switch (spec.kind) {
        case IfKind::outer_approx:
          for (auto& v : p.values()) v = rng_.normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim_)));
          break;
        case IfKind::kernel_matrix:
          for (std::size_t k = 0; k < dim_; ++k) p[k * dim_ + k] = 1.0;
          break;
        default:
          p.fill(1.0);
      }
      term.if_params = store_.add("if/" + spec.tuple.str() + "/" + if_kind_name(spec.kind), std::move(p),
                                  OptimizerTag::adam);
    }
    terms_.push_back(std::move(term));
  }
  if (config_.head == Head::ipnn && !mlp_.empty()) mlp_.append_inputs(store_, specs.size());
  ++structure_version_;
  return alpha_id;
}

std::vector<double> Model::beta(std::size_t field) const {
  std::vector<double> out(dim_, 1.0);
  if (beta_ != kNoParam) {
    const auto row = store_[beta_].value.row(field);
    out.assign(row.begin(), row.end());
  }
  return out;
}

std::vector<std::vector<double>> Model::embed(const Dataset& data, std::size_t row, IfKind kind) const {
  const std::size_t slot = config_.slot_of(kind);
  std::vector<std::vector<double>> out(schema_.field_count(), std::vector<double>(dim_, 0.0));
  for (std::size_t f = 0; f < schema_.field_count(); ++f) {
    const auto tid = tables_[f][slot];
    if (tid == kNoParam) continue;
    const auto& table = store_[tid].value;
    const auto& pos = retained_[f];
    for (auto id : data.ids(row, f)) {
      if (id >= schema_.vocab_sizes[f]) throw ValidationError("feature id out of range");
      for (std::size_t r = 0; r < pos.size(); ++r) out[f][pos[r]] += table.at(id, r);
    }
    const auto b = beta(f);
    for (std::size_t k = 0; k < dim_; ++k) out[f][k] *= b[k];
  }
  return out;
}

ForwardPass Model::forward(const Dataset& data, std::span<const std::size_t> rows, Mode mode, bool update_running) {
  if (data.field_count() != schema_.field_count()) throw ValidationError("dataset field count does not match model");
  const std::size_t batch = rows.size();
  const std::size_t n = schema_.field_count();
  const std::size_t terms = terms_.size();
  ForwardPass pass;
  pass.mode = mode;
  pass.rows.assign(rows.begin(), rows.end());
  pass.structure_version = structure_version_;
  pass.data = &data;
  pass.labels.resize(batch);
  pass.pooled.assign(batch * n * slots_ * dim_, 0.0);

  for (std::size_t b = 0; b < batch; ++b) {
    pass.labels[b] = data.label(rows[b]);
    for (std::size_t f = 0; f < n; ++f) {
      const auto& pos = retained_[f];
      const auto ids = data.ids(rows[b], f);
      for (std::size_t s = 0; s < slots_; ++s) {
        const auto tid = tables_[f][s];
        if (tid == kNoParam) continue;
        const auto& table = store_[tid].value;
        double* out = pass.pooled.data() + cell(b, f, s);
        for (auto id : ids) {
          const double* src = table.values().data() + id * pos.size();
          for (std::size_t r = 0; r < pos.size(); ++r) out[pos[r]] += src[r];
        }
      }
    }
  }

  pass.embedded = pass.pooled;
  if (beta_ != kNoParam) {
    const auto& beta = store_[beta_].value;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < n; ++f) {
        for (std::size_t s = 0; s < slots_; ++s) {
          double* e = pass.embedded.data() + cell(b, f, s);
          for (std::size_t k = 0; k < dim_; ++k) e[k] *= beta[f * dim_ + k];
        }
      }
    }
  }

  pass.raw.assign(terms * batch, 0.0);
  pass.normalized.assign(terms * batch, 0.0);
  pass.gated.assign(terms * batch, 0.0);
  std::array<std::span<const double>, kMaxOrder> refs;
  for (std::size_t t = 0; t < terms; ++t) {
    auto& term = terms_[t];
    const auto& fields = term.tuple.fields();
    const std::span<const double> params =
        term.if_params == kNoParam ? std::span<const double>() : store_[term.if_params].value.values();
    double* raw = pass.raw.data() + t * batch;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < fields.size(); ++j) {
        refs[j] = {pass.embedded.data() + cell(b, fields[j], term.slot), dim_};
      }
      raw[b] = if_forward(term.kind, EmbeddingRefs(refs.data(), fields.size()), params);
    }
    const std::span<const double> raw_span(raw, batch);
    const std::span<double> norm_span(pass.normalized.data() + t * batch, batch);
    if (config_.batch_norm) {
      bn_forward(raw_span, term.bn, mode, norm_span, update_running && mode == Mode::train);
    } else {
      std::copy(raw_span.begin(), raw_span.end(), norm_span.begin());
    }
    const double a = alpha(term);
    for (std::size_t b = 0; b < batch; ++b) pass.gated[t * batch + b] = a * norm_span[b];
  }

  pass.interaction.assign(batch, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    double acc = 0.0;
    if (bias_ != kNoParam) {
      acc = store_[bias_].value[0];
      for (std::size_t f = 0; f < n; ++f) {
        const auto& w = store_[linear_[f]].value;
        for (auto id : data.ids(rows[b], f)) acc += w[id];
      }
    }
    for (std::size_t t = 0; t < terms; ++t) acc += pass.gated[t * batch + b];
    pass.interaction[b] = acc;
  }

  pass.logits = pass.interaction;
  if (config_.has_mlp()) {
    const std::size_t ew = mlp_embedding_width();
    const std::size_t width = mlp_.input_width();
    pass.mlp_input.assign(batch * width, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      double* in = pass.mlp_input.data() + b * width;
      std::size_t c = 0;
      for (std::size_t f = 0; f < n; ++f) {
        const double* e = pass.embedded.data() + cell(b, f, 0);
        for (auto k : retained_[f]) in[c++] = e[k];
      }
      if (config_.head == Head::ipnn) {
        for (std::size_t t = 0; t < terms; ++t) in[ew + t] = pass.gated[t * batch + b];
      }
    }
    const auto out = mlp_.forward(store_, pass.mlp_input, batch, pass.mlp_cache);
    for (std::size_t b = 0; b < batch; ++b) {
      pass.logits[b] = config_.head == Head::deepfm ? pass.interaction[b] + out[b] : out[b];
    }
  }

  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) total += ops::logloss_from_logit(pass.logits[b], pass.labels[b]);
  pass.mean_loss = batch ? total / static_cast<double>(batch) : 0.0;
  return pass;
}

void Model::backward(ForwardPass& pass) {
  if (pass.consumed || pass.structure_version != structure_version_) {
    throw ValidationError("backward called with a stale forward cache");
  }
  pass.consumed = true;
  const std::size_t batch = pass.rows.size();
  if (batch == 0) return;
  const std::size_t n = schema_.field_count();
  const std::size_t terms = terms_.size();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const Dataset& data = *pass.data;

  std::vector<double> dlogit(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    dlogit[b] = ops::logloss_from_logit_grad(pass.logits[b], pass.labels[b]) * inv_batch;
  }

  std::vector<double> dembedded(pass.embedded.size(), 0.0);
  std::vector<double> dgated(terms * batch, 0.0);
  std::vector<double> dinteraction(batch, 0.0);
  if (config_.head != Head::ipnn) dinteraction = dlogit;

  if (config_.has_mlp()) {
    const auto dinput = mlp_.backward(store_, pass.mlp_cache, dlogit);
    const std::size_t ew = mlp_embedding_width();
    const std::size_t width = mlp_.input_width();
    for (std::size_t b = 0; b < batch; ++b) {
      const double* din = dinput.data() + b * width;
      std::size_t c = 0;
      for (std::size_t f = 0; f < n; ++f) {
        double* de = dembedded.data() + cell(b, f, 0);
        for (auto k : retained_[f]) de[k] += din[c++];
      }
      if (config_.head == Head::ipnn) {
        for (std::size_t t = 0; t < terms; ++t) dgated[t * batch + b] += din[ew + t];
      }
    }
  }

  if (config_.head != Head::ipnn) {
    auto& dbias = store_[bias_].grad;
    for (std::size_t b = 0; b < batch; ++b) {
      const double g = dinteraction[b];
      dbias[0] += g;
      for (std::size_t f = 0; f < n; ++f) {
        auto& dw = store_[linear_[f]].grad;
        for (auto id : data.ids(pass.rows[b], f)) dw[id] += g;
      }
      for (std::size_t t = 0; t < terms; ++t) dgated[t * batch + b] += g;
    }
  }

  std::array<std::span<const double>, kMaxOrder> refs;
  std::array<std::span<double>, kMaxOrder> grads;
  std::vector<double> dnorm(batch), draw(batch);
  for (std::size_t t = 0; t < terms; ++t) {
    auto& term = terms_[t];
    const auto& fields = term.tuple.fields();
    const double a = alpha(term);
    double dalpha = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double g = dgated[t * batch + b];
      dalpha += g * pass.normalized[t * batch + b];
      dnorm[b] = a * g;
    }
    store_[term.alpha_param].grad[term.alpha_index] += dalpha;
    std::fill(draw.begin(), draw.end(), 0.0);
    if (config_.batch_norm) {
      bn_backward(std::span<const double>(pass.normalized.data() + t * batch, batch), dnorm, term.bn, pass.mode, draw);
    } else {
      draw = dnorm;
    }
    const std::span<const double> params =
        term.if_params == kNoParam ? std::span<const double>() : store_[term.if_params].value.values();
    const std::span<double> dparams =
        term.if_params == kNoParam ? std::span<double>() : store_[term.if_params].grad.values();
    for (std::size_t b = 0; b < batch; ++b) {
      if (draw[b] == 0.0) continue;
      for (std::size_t j = 0; j < fields.size(); ++j) {
        refs[j] = {pass.embedded.data() + cell(b, fields[j], term.slot), dim_};
        grads[j] = {dembedded.data() + cell(b, fields[j], term.slot), dim_};
      }
      if_backward(term.kind, EmbeddingRefs(refs.data(), fields.size()), params, draw[b],
                  EmbeddingGrads(grads.data(), fields.size()), dparams);
    }
  }

  // Through the dimension gates: embedded = pooled * beta.
  std::vector<double>& dpooled = dembedded;
  if (beta_ != kNoParam) {
    auto& beta = store_[beta_];
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < n; ++f) {
        for (std::size_t s = 0; s < slots_; ++s) {
          const std::size_t base = cell(b, f, s);
          for (std::size_t k = 0; k < dim_; ++k) {
            const double g = dembedded[base + k];
            beta.grad[f * dim_ + k] += g * pass.pooled[base + k];
            dpooled[base + k] = g * beta.value[f * dim_ + k];
          }
        }
      }
    }
  }

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < n; ++f) {
      const auto& pos = retained_[f];
      const auto ids = data.ids(pass.rows[b], f);
      for (std::size_t s = 0; s < slots_; ++s) {
        const auto tid = tables_[f][s];
        if (tid == kNoParam) continue;
        auto& grad = store_[tid].grad;
        const double* g = dpooled.data() + cell(b, f, s);
        for (auto id : ids) {
          double* dst = grad.values().data() + id * pos.size();
          for (std::size_t r = 0; r < pos.size(); ++r) dst[r] += g[pos[r]];
        }
      }
    }
  }
}

double Model::accumulate_gradients(const Dataset& data, std::span<const std::size_t> rows) {
  auto pass = forward(data, rows, Mode::train, true);
  backward(pass);
  return pass.mean_loss;
}

double Model::loss(const Dataset& data, std::span<const std::size_t> rows, Mode mode) {
  return forward(data, rows, mode, false).mean_loss;
}

std::vector<double> Model::predict_logits(const Dataset& data, std::span<const std::size_t> rows) {
  constexpr std::size_t kChunk = 1024;
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const auto count = std::min(kChunk, rows.size() - start);
    const auto pass = forward(data, rows.subspan(start, count), Mode::eval, false);
    out.insert(out.end(), pass.logits.begin(), pass.logits.end());
  }
  return out;
}

}  // namespace aim
