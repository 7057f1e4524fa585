#include "aim/commands.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "aim/checkpoint.hpp"
#include "aim/error.hpp"
#include "aim/metrics.hpp"
#include "aim/search.hpp"
#include "aim/train.hpp"

namespace aim {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& doc) { write_text(path, doc.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json metric_obj(const MetricReport& r, const std::string& split) {
  return {{"split", split}, {"auc", r.auc}, {"logloss", r.logloss}, {"count", r.count}};
}

nlohmann::ordered_json pair_json(const SelectedPair& p) {
  auto fields = nlohmann::ordered_json::array();
  for (auto f : p.tuple.fields()) fields.push_back(f + 1);
  return {{"fields", fields}, {"if", if_kind_name(p.kind)}, {"alpha", p.alpha}};
}

SelectedPair pair_from(const nlohmann::json& j) {
  std::vector<std::size_t> fields;
  for (auto f : j.at("fields").get<std::vector<std::size_t>>()) {
    if (f == 0) throw ValidationError("pair field indices are 1-based");
    fields.push_back(f - 1);
  }
  return {InteractionTuple(fields), parse_if_kind(j.at("if").get<std::string>()), j.at("alpha").get<double>()};
}

std::string epochs_jsonl(const std::vector<EpochRecord>& records) {
  std::string text;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["stage"] = r.stage;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    if (r.has_valid) j["valid"] = metric_obj(r.valid, "valid");
    j["open_gates"] = r.open_gates;
    text += j.dump() + "\n";
  }
  return text;
}

void log_epochs(std::ostream* log, const std::vector<EpochRecord>& records) {
  if (!log) return;
  for (const auto& r : records) {
    *log << r.stage << " epoch " << r.epoch << " train_loss " << r.train_loss;
    if (r.has_valid) *log << " valid_logloss " << r.valid.logloss << " valid_auc " << r.valid.auc;
    *log << " open_gates " << r.open_gates << "\n";
  }
}

// Configuration recorded in checkpoints: everything except the output
// directory, so identical runs in different directories match.
nlohmann::ordered_json checkpoint_meta(const RunConfig& config, const std::string& stage) {
  auto j = config.to_json();
  j.erase("output");
  return {{"stage", stage}, {"config", j}};
}

void check_schema(const Dataset& data, const SearchArtifact& artifact) {
  try {
    artifact.validate(&data.schema());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("artifact does not match the dataset: ") + e.what());
  }
}

}  // namespace

Dataset load_run_data(const RunConfig& config) {
  config.validate();
  auto data = load_dataset(config.data_path, config.format);
  return split(std::move(data), config.train_fraction, config.valid_fraction, config.test_fraction,
               config.split_seed);
}

nlohmann::ordered_json cmd_synth(const SynthConfig& config, const std::string& out_dir) {
  try {
    config.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  const auto result = generate_synthetic(config);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_synthetic(config, result, (dir / "data.svm").string(), (dir / "manifest.json").string());
  auto summary = result.manifest(config);
  summary["data"] = (dir / "data.svm").string();
  return summary;
}

nlohmann::ordered_json cmd_search_interactions(const RunConfig& config, std::ostream* log) {
  const auto data = load_run_data(config);
  const auto result = run_stage1(data, config.search);
  log_epochs(log, result.epochs);

  const fs::path dir = fs::path(config.output_dir) / "stage1";
  fs::create_directories(dir);
  save_checkpoint((dir / "checkpoint.json").string(), result.model, data.vocabulary(),
                  checkpoint_meta(config, "search_interaction_if"));
  write_text(dir / "epochs.jsonl", epochs_jsonl(result.epochs));

  const std::size_t n = data.field_count();
  std::set<InteractionTuple> second;
  for (const auto& p : result.survivors) {
    if (p.tuple.order() == 2) second.insert(p.tuple);
  }
  nlohmann::ordered_json report;
  report["fields"] = n;
  report["kinds"] = nlohmann::ordered_json::array();
  for (auto k : config.search.model.kinds) report["kinds"].push_back(if_kind_name(k));
  auto orders = nlohmann::ordered_json::array();
  std::size_t candidates = 0, surviving = 0;
  for (const auto& o : result.orders) {
    candidates += o.candidates;
    surviving += o.surviving_tuples;
    orders.push_back({{"order", o.order},
                      {"candidates", o.candidates},
                      {"gates", o.gates},
                      {"surviving_tuples", o.surviving_tuples},
                      {"surviving_pairs", o.surviving_pairs},
                      {"fi_ratio", o.candidates ? static_cast<double>(o.surviving_tuples) / o.candidates : 0.0}});
  }
  report["orders"] = orders;
  report["fi_ratio"] = candidates ? static_cast<double>(surviving) / static_cast<double>(candidates) : 0.0;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : result.survivors) pairs.push_back(pair_json(p));
  report["pairs"] = pairs;
  write_json(dir / "report.json", report);
  return report;
}

nlohmann::ordered_json cmd_search_embed(const RunConfig& config, std::ostream* log) {
  const auto data = load_run_data(config);
  const fs::path root(config.output_dir);
  const auto stage1 = read_json(root / "stage1" / "report.json");
  std::vector<SelectedPair> survivors;
  try {
    if (stage1.at("fields").get<std::size_t>() != data.field_count()) {
      throw ConfigError("stage-1 report was produced for a different field count");
    }
    for (const auto& j : stage1.at("pairs")) survivors.push_back(pair_from(j));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("stage1/report.json: ") + e.what());
  }

  const auto result = run_stage2(data, survivors, config.search);
  log_epochs(log, result.epochs);
  std::vector<SelectedPair> removed;
  const auto artifact = extract_artifact(data.schema(), survivors, result.retained, config.search, &removed);

  const fs::path dir = root / "stage2";
  fs::create_directories(dir);
  save_checkpoint((dir / "checkpoint.json").string(), result.model, data.vocabulary(),
                  checkpoint_meta(config, "search_embed"));
  write_text(dir / "epochs.jsonl", epochs_jsonl(result.epochs));
  artifact.save((root / "artifact.json").string());

  nlohmann::ordered_json report;
  report["embedding_dim"] = artifact.embedding_dim;
  auto dims = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < artifact.field_count(); ++f) dims.push_back(artifact.dims(f));
  report["d_i"] = dims;
  auto dropped = nlohmann::ordered_json::array();
  for (const auto& p : removed) dropped.push_back(pair_json(p));
  report["removed_pairs"] = dropped;
  report["pairs"] = artifact.pairs.size();
  write_json(dir / "report.json", report);
  if (log) {
    for (const auto& p : removed) *log << "removed " << p.tuple.str() << " " << if_kind_name(p.kind) << ": field dropped\n";
  }
  return report;
}

nlohmann::ordered_json cmd_retrain(const RunConfig& config, const std::string& artifact_path, std::ostream* log) {
  const auto data = load_run_data(config);
  const fs::path root(config.output_dir);
  const auto artifact = SearchArtifact::load(artifact_path.empty() ? (root / "artifact.json").string() : artifact_path);
  check_schema(data, artifact);

  const auto result = run_stage3(data, artifact, config.search);
  log_epochs(log, result.epochs);
  const auto model_config = config.search.retrain_model();
  const auto full = identity_artifact(data.schema(), model_config);

  const fs::path dir = root / "retrain";
  fs::create_directories(dir);
  auto meta = checkpoint_meta(config, "retrain");
  meta["best_epoch"] = result.best_epoch;
  save_checkpoint((dir / "checkpoint.json").string(), result.model, data.vocabulary(), meta);

  std::string metrics;
  for (const auto& r : result.epochs) {
    if (!r.has_valid) continue;
    auto j = metric_obj(r.valid, "valid");
    j["epoch"] = r.epoch;
    metrics += j.dump() + "\n";
  }
  if (result.has_test) {
    auto j = metric_obj(result.test, "test");
    j["epoch"] = result.best_epoch;
    metrics += j.dump() + "\n";
  }
  write_text(root / "metrics.jsonl", metrics);

  nlohmann::ordered_json report;
  report["head"] = head_name(model_config.head);
  report["pairs"] = artifact.pairs.size();
  report["parameter_count"] = result.model.parameter_count();
  report["analytic_parameter_count"] = analytic_parameter_count(data.schema(), artifact, model_config);
  report["full_parameter_count"] = analytic_parameter_count(data.schema(), full, model_config);
  report["best_epoch"] = result.best_epoch;
  if (result.has_test) report["test"] = metric_obj(result.test, "test");
  write_json(dir / "report.json", report);
  return report;
}

nlohmann::ordered_json cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                                    const std::string& split_name, const std::optional<std::string>& format) {
  auto loaded = load_checkpoint(checkpoint_path);
  nlohmann::json data_meta;
  try {
    data_meta = loaded.meta.at("config").at("data");
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("checkpoint carries no data configuration");
  }
  const auto fmt = parse_format(format ? *format : data_meta.at("format").get<std::string>());
  if (!fs::is_regular_file(data_path)) throw ConfigError("dataset '" + data_path + "' does not exist");
  auto data = load_dataset(data_path, fmt, &loaded.vocabulary);
  if (data.schema().vocab_sizes != loaded.model.schema().vocab_sizes) {
    throw ValidationError("dataset fields do not match the checkpoint");
  }
  data = split(std::move(data), data_meta.at("train").get<double>(), data_meta.at("valid").get<double>(),
               data_meta.at("test").get<double>(), data_meta.at("split_seed").get<std::uint64_t>());
  std::vector<std::size_t> rows;
  if (split_name == "all") {
    rows.resize(data.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  } else {
    rows = data.indices(parse_split(split_name));
  }
  if (rows.empty()) throw ValidationError("split '" + split_name + "' is empty");
  return metric_obj(evaluate(loaded.model, data, rows), split_name);
}

nlohmann::ordered_json cmd_run(const RunConfig& config, std::ostream* log) {
  nlohmann::ordered_json summary;
  const auto s1 = cmd_search_interactions(config, log);
  summary["fi_ratio"] = s1["fi_ratio"];
  summary["survivors"] = s1["pairs"].size();
  const auto s2 = cmd_search_embed(config, log);
  summary["d_i"] = s2["d_i"];
  summary["retrain"] = cmd_retrain(config, "", log);
  return summary;
}

nlohmann::ordered_json cmd_stats_auc(const RunConfig& config, const std::vector<std::vector<std::size_t>>& tuples) {
  const auto data = load_run_data(config);
  std::vector<InteractionTuple> list;
  if (tuples.empty()) {
    list = enumerate_second_order(data.field_count());
  } else {
    for (const auto& t : tuples) {
      std::vector<std::size_t> fields;
      for (auto f : t) {
        if (f == 0 || f > data.field_count()) throw ConfigError("field index out of range");
        fields.push_back(f - 1);
      }
      try {
        list.emplace_back(fields);
      } catch (const ValidationError& e) {
        throw ConfigError(e.what());
      }
    }
  }
  const auto train = data.indices(Split::train);
  const auto test = data.indices(Split::test);
  auto out = nlohmann::ordered_json::array();
  for (const auto& tuple : list) {
    auto fields = nlohmann::ordered_json::array();
    for (auto f : tuple.fields()) fields.push_back(f + 1);
    out.push_back({{"fields", fields}, {"statistics_auc", statistics_auc(data, train, test, tuple)}});
  }
  return {{"split", "test"}, {"tuples", out}};
}

}  // namespace aim
