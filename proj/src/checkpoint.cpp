#include "aim/checkpoint.hpp"

#include <fstream>
#include <map>

#include "aim/error.hpp"

namespace aim {

namespace {

constexpr const char* kFormat = "aim-checkpoint-1";

nlohmann::ordered_json tensor_json(const Tensor& t) {
  nlohmann::ordered_json j;
  j["shape"] = t.shape();
  j["values"] = std::vector<double>(t.values().begin(), t.values().end());
  return j;
}

Tensor tensor_from(const nlohmann::json& j) {
  if (j.is_null()) return {};
  return Tensor(j.at("shape").get<std::vector<std::size_t>>(), j.at("values").get<std::vector<double>>());
}

nlohmann::ordered_json bn_json(const BnState& s) {
  return {{"batch_mean", s.batch_mean}, {"batch_std", s.batch_std},   {"running_mean", s.running_mean},
          {"running_var", s.running_var}, {"epsilon", s.epsilon},     {"momentum", s.momentum}};
}

BnState bn_from(const nlohmann::json& j) {
  BnState s;
  s.batch_mean = j.at("batch_mean").get<double>();
  s.batch_std = j.at("batch_std").get<double>();
  s.running_mean = j.at("running_mean").get<double>();
  s.running_var = j.at("running_var").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.momentum = j.at("momentum").get<double>();
  return s;
}

}  // namespace

nlohmann::ordered_json model_config_json(const ModelConfig& config) {
  nlohmann::ordered_json j;
  j["head"] = head_name(config.head);
  j["max_order"] = config.max_order;
  auto kinds = nlohmann::ordered_json::array();
  for (auto k : config.kinds) kinds.push_back(if_kind_name(k));
  j["kinds"] = kinds;
  j["embedding_dim"] = config.embedding_dim;
  j["mlp_widths"] = config.mlp_widths;
  j["embedding_mode"] = embedding_mode_name(config.embedding_mode);
  j["batch_norm"] = config.batch_norm;
  j["bn_epsilon"] = config.bn_epsilon;
  j["bn_momentum"] = config.bn_momentum;
  j["embedding_init_std"] = config.embedding_init_std;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.head = parse_head(j.at("head").get<std::string>());
  c.max_order = j.at("max_order").get<std::size_t>();
  c.kinds.clear();
  for (const auto& k : j.at("kinds")) c.kinds.push_back(parse_if_kind(k.get<std::string>()));
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.mlp_widths = j.at("mlp_widths").get<std::vector<std::size_t>>();
  c.embedding_mode = parse_embedding_mode(j.at("embedding_mode").get<std::string>());
  c.batch_norm = j.at("batch_norm").get<bool>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.embedding_init_std = j.at("embedding_init_std").get<double>();
  return c;
}

nlohmann::ordered_json checkpoint_json(const Model& model, const Vocabulary& vocabulary,
                                       const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json doc;
  doc["format"] = kFormat;
  doc["config"] = model_config_json(model.config());
  doc["schema"] = {{"vocab_sizes", model.schema().vocab_sizes}, {"multi_hot", model.schema().multi_hot}};
  doc["vocabulary"] = vocabulary.tokens();
  doc["retained"] = model.retained();
  doc["dimension_gates"] = model.dimension_gates();
  const auto* beta = model.params().find("beta");
  doc["beta_tag"] = optimizer_tag_name(beta ? beta->tag() : OptimizerTag::grda);

  auto groups = nlohmann::ordered_json::array();
  std::map<ParameterStore::Id, std::size_t> group_of;
  for (const auto& t : model.terms()) {
    if (!group_of.contains(t.alpha_param)) {
      group_of[t.alpha_param] = groups.size();
      groups.push_back({{"tag", optimizer_tag_name(model.params()[t.alpha_param].tag())},
                        {"terms", nlohmann::ordered_json::array()}});
    }
    auto fields = nlohmann::ordered_json::array();
    for (auto f : t.tuple.fields()) fields.push_back(f + 1);
    groups[group_of[t.alpha_param]]["terms"].push_back({{"fields", fields}, {"if", if_kind_name(t.kind)}});
  }
  doc["groups"] = groups;

  auto params = nlohmann::ordered_json::array();
  for (const auto& p : model.params()) {
    nlohmann::ordered_json j;
    j["name"] = p->name();
    j["tag"] = optimizer_tag_name(p->tag());
    j["value"] = tensor_json(p->value);
    if (p->adam.m.size() > 0) {
      j["adam"] = {{"m", tensor_json(p->adam.m)}, {"v", tensor_json(p->adam.v)}, {"step", p->adam.step}};
    }
    if (p->tag() == OptimizerTag::grda) {
      j["grda"] = {{"alpha0", tensor_json(p->grda.alpha0)},
                   {"accumulator", tensor_json(p->grda.accumulator)},
                   {"step", p->grda.step},
                   {"lr", p->grda.config.lr},
                   {"c", p->grda.config.c},
                   {"mu", p->grda.config.mu}};
    }
    params.push_back(std::move(j));
  }
  doc["parameters"] = std::move(params);
  auto bn = nlohmann::ordered_json::array();
  for (const auto& t : model.terms()) bn.push_back(bn_json(t.bn));
  doc["bn"] = std::move(bn);
  doc["rng"] = model.rng().state();
  doc["meta"] = meta;
  return doc;
}

LoadedCheckpoint checkpoint_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw ValidationError("unsupported checkpoint format");
    const auto config = model_config_from_json(doc.at("config"));
    FieldSchema schema{doc.at("schema").at("vocab_sizes").get<std::vector<std::size_t>>(),
                       doc.at("schema").at("multi_hot").get<std::vector<bool>>()};
    auto vocabulary = Vocabulary::from_tokens(doc.at("vocabulary").get<std::vector<std::vector<std::string>>>());

    std::vector<std::pair<OptimizerTag, std::vector<TermSpec>>> groups;
    for (const auto& g : doc.at("groups")) {
      std::vector<TermSpec> specs;
      for (const auto& t : g.at("terms")) {
        std::vector<std::size_t> fields;
        for (auto f : t.at("fields").get<std::vector<std::size_t>>()) fields.push_back(f - 1);
        specs.push_back({InteractionTuple(fields), parse_if_kind(t.at("if").get<std::string>())});
      }
      groups.emplace_back(parse_optimizer_tag(g.at("tag").get<std::string>()), std::move(specs));
    }

    Architecture arch;
    arch.retained = doc.at("retained").get<std::vector<std::vector<std::size_t>>>();
    arch.dimension_gates = doc.at("dimension_gates").get<bool>();
    arch.beta_tag = parse_optimizer_tag(doc.at("beta_tag").get<std::string>());
    if (!groups.empty()) {
      arch.alpha_tag = groups.front().first;
      arch.terms = groups.front().second;
    }
    Model model(schema, config, arch, 0);
    for (std::size_t g = 1; g < groups.size(); ++g) model.add_terms(groups[g].second, groups[g].first);

    const auto& params = doc.at("parameters");
    if (params.size() != model.params().size()) throw ValidationError("checkpoint parameter count mismatch");
    std::size_t i = 0;
    for (auto& p : model.params()) {
      const auto& j = params[i++];
      if (j.at("name").get<std::string>() != p->name()) {
        throw ValidationError("checkpoint parameter '" + j.at("name").get<std::string>() + "' does not match '" +
                              p->name() + "'");
      }
      auto value = tensor_from(j.at("value"));
      if (!value.same_shape(p->value)) throw ValidationError("checkpoint shape mismatch for " + p->name());
      p->value = std::move(value);
      if (j.contains("adam")) {
        p->adam.m = tensor_from(j["adam"].at("m"));
        p->adam.v = tensor_from(j["adam"].at("v"));
        p->adam.step = j["adam"].at("step").get<std::uint64_t>();
      }
      if (j.contains("grda")) {
        const auto& g = j["grda"];
        p->grda.alpha0 = tensor_from(g.at("alpha0"));
        p->grda.accumulator = tensor_from(g.at("accumulator"));
        p->grda.step = g.at("step").get<std::uint64_t>();
        p->grda.config = {g.at("lr").get<double>(), g.at("c").get<double>(), g.at("mu").get<double>()};
      }
    }
    const auto& bn = doc.at("bn");
    if (bn.size() != model.terms().size()) throw ValidationError("checkpoint BN state count mismatch");
    for (std::size_t t = 0; t < bn.size(); ++t) model.terms()[t].bn = bn_from(bn[t]);
    model.rng().restore(doc.at("rng").get<std::string>());
    return {std::move(model), std::move(vocabulary), doc.at("meta")};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocabulary,
                     const nlohmann::ordered_json& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << checkpoint_json(model, vocabulary, meta).dump() << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace aim
