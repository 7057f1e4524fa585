#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aim/checkpoint.hpp"
#include "aim/commands.hpp"
#include "aim/config.hpp"
#include "aim/error.hpp"
#include "aim/search.hpp"
#include "aim/train.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using namespace aim;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("aim_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small synthetic dataset plus a fast config pointing at it.
fs::path make_run(const fs::path& dir, const std::string& extra = "") {
  SynthConfig synth;
  synth.fields = 5;
  synth.vocab = 6;
  synth.planted = 2;
  synth.rows = 2000;
  synth.seed = 4;
  cmd_synth(synth, (dir / "syn").string());
  const auto cfg = dir / "run.ini";
  std::ofstream(cfg) << "[data]\npath = " << (dir / "syn" / "data.svm").string()
                     << "\n[model]\nembedding_dim = 4\nmlp_widths = 6,4\n"
                     << "[train]\nbatch_size = 64\n[stage1]\nepochs = 1\n[stage2]\nepochs = 1\n"
                     << "[retrain]\nepochs = 2\nmlp_widths = 6,4\n[output]\ndir = " << (dir / "out").string() << "\n"
                     << extra;
  return cfg;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AIM_CLI_PATH) + " -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config parsing, defaults and overrides") {
  const auto c = parse_run_config(
      "[data]\npath = x.svm\nformat = delimited\n"
      "[model]\nhead = deepfm\nkinds = inner, kernel_scalar\nmlp_widths = 8,4\nbatch_norm = false\n"
      "[stage1]\ngrda_c = 0.005\ngrda_mu = 0.9\n"
      "[retrain]\nhead = ipnn\n",
      {"train.seed=9", "model.embedding_dim = 12"});
  CHECK(c.data_path == "x.svm");
  CHECK(c.format == DataFormat::delimited);
  CHECK(c.search.model.head == Head::deepfm);
  CHECK(c.search.model.kinds == std::vector<IfKind>{IfKind::inner, IfKind::kernel_scalar});
  CHECK(c.search.model.mlp_widths == std::vector<std::size_t>{8, 4});
  CHECK_FALSE(c.search.model.batch_norm);
  CHECK(c.search.stage1.optim.grda.c == 0.005);
  CHECK(c.search.stage1.optim.grda.mu == 0.9);
  CHECK(c.search.stage2.optim.grda.c == 0.05);
  CHECK(c.search.retrain_head == Head::ipnn);
  CHECK(c.search.seed == 9);
  CHECK(c.search.model.embedding_dim == 12);
  CHECK(c.train_fraction == 0.8);

  CHECK_THROWS_AS(parse_run_config("[model]\nhaed = fm\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[modle]\nhead = fm\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[model]\nembedding_dim = four\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[model]\nhead = xdeepfm\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("", {"no-dot=1"}), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\npath = /nonexistent.svm\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\npath = a\n[stage2]\ngrda_c = -1\n").validate(false), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\npath = a\n[stage2]\ngrda_mu = 1\n").validate(false), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\npath = a\ntrain = 0.9\n").validate(false), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent.ini"), ConfigError);
  CHECK(config_reference().find("grda_mu = 0.6") != std::string::npos);
}

TEST_CASE("checkpoints restore parameters, optimizer state, BN and RNG exactly") {
  const auto data = split(testing::random_dataset(300, 5, 6, true), 0.8, 0.1, 0.1, 1);
  ModelConfig config;
  config.head = Head::deepfm;
  config.embedding_dim = 3;
  config.mlp_widths = {5};
  config.max_order = 3;
  Architecture arch;
  for (const auto& tuple : enumerate_second_order(5)) {
    for (auto kind : config.kinds) arch.terms.push_back({tuple, kind});
  }
  arch.dimension_gates = true;
  Model model(data.schema(), config, arch, 3);
  model.add_terms(std::vector<TermSpec>{{InteractionTuple({0, 1, 2}), IfKind::kernel_vector}}, OptimizerTag::grda);
  const BatchStream stream(data.indices(Split::train), 32, 5);
  OptimizerSettings optim;
  optim.grda.lr = 0.3;
  train_epoch(model, data, stream, 0, optim);

  const auto path = fresh_dir("ckpt") / "model.json";
  save_checkpoint(path.string(), model, data.vocabulary(), {{"note", "x"}});
  auto loaded = load_checkpoint(path.string());
  CHECK(loaded.meta["note"] == "x");
  Model& copy = loaded.model;
  REQUIRE(copy.params().size() == model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto& a = model.params()[i];
    const auto& b = copy.params()[i];
    CHECK(a.name() == b.name());
    CHECK(a.tag() == b.tag());
    CHECK(bit_equal(a.value, b.value));
    CHECK(a.adam.step == b.adam.step);
    CHECK(a.grda.step == b.grda.step);
    if (a.tag() == OptimizerTag::grda) CHECK(bit_equal(a.grda.accumulator, b.grda.accumulator));
  }
  const auto rows = data.indices(Split::test);
  const auto pa = model.predict_logits(data, rows);
  const auto pb = copy.predict_logits(data, rows);
  CHECK(std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(double)) == 0);

  // Training resumes identically.
  train_epoch(model, data, stream, 1, optim);
  train_epoch(copy, data, stream, 1, optim);
  for (std::size_t i = 0; i < model.params().size(); ++i) CHECK(bit_equal(model.params()[i].value, copy.params()[i].value));
  CHECK(model.rng().state() == copy.rng().state());
  CHECK(checkpoint_json(model, data.vocabulary()).dump() == checkpoint_json(copy, loaded.vocabulary).dump());

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), ConfigError);
  auto doc = nlohmann::json::parse(slurp(path));
  doc["parameters"][0]["name"] = "bogus";
  CHECK_THROWS_AS(checkpoint_from_json(doc), ValidationError);
}

TEST_CASE("pipeline commands write the run directory deterministically") {
  const auto dir = fresh_dir("pipeline");
  const auto config = load_run_config(make_run(dir).string());
  const auto summary = cmd_run(config);
  const auto out = dir / "out";
  for (const char* f : {"stage1/checkpoint.json", "stage1/report.json", "stage1/epochs.jsonl", "stage2/checkpoint.json",
                        "stage2/report.json", "artifact.json", "retrain/checkpoint.json", "retrain/report.json",
                        "metrics.jsonl"}) {
    CHECK(fs::exists(out / f));
  }
  const auto report = nlohmann::json::parse(slurp(out / "stage1" / "report.json"));
  CHECK(report["fi_ratio"].get<double>() <= 1.0);
  CHECK(report["orders"][0]["candidates"] == 10);
  CHECK(report["orders"][0]["gates"] == 40);

  const auto retrain = nlohmann::json::parse(slurp(out / "retrain" / "report.json"));
  CHECK(retrain["parameter_count"] == retrain["analytic_parameter_count"]);
  CHECK(retrain["parameter_count"].get<std::size_t>() <= retrain["full_parameter_count"].get<std::size_t>());
  CHECK(SearchArtifact::load((out / "artifact.json").string()).pairs.size() == retrain["pairs"].get<std::size_t>());

  // One metric line per retrain epoch plus the test line.
  std::ifstream metrics(out / "metrics.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("split"));
    CHECK(j.contains("auc"));
    CHECK(j.contains("logloss"));
    CHECK(j.contains("count"));
    ++lines;
  }
  CHECK(lines == 3);

  const auto artifact = slurp(out / "artifact.json");
  const auto metric_text = slurp(out / "metrics.jsonl");
  const auto checkpoint = slurp(out / "retrain" / "checkpoint.json");
  cmd_run(config);
  CHECK(slurp(out / "artifact.json") == artifact);
  CHECK(slurp(out / "metrics.jsonl") == metric_text);
  CHECK(slurp(out / "retrain" / "checkpoint.json") == checkpoint);

  // Evaluate reproduces the retrain test metrics and is repeatable.
  const auto data = (dir / "syn" / "data.svm").string();
  const auto ck = (out / "retrain" / "checkpoint.json").string();
  const auto eval = cmd_evaluate(ck, data, "test");
  CHECK(eval.dump() == cmd_evaluate(ck, data, "test").dump());
  CHECK(eval["logloss"] == summary["retrain"]["test"]["logloss"]);
  CHECK_THROWS_AS(cmd_evaluate(ck, data, "holdout"), ConfigError);
}

TEST_CASE("search-embed needs the stage-1 report") {
  const auto dir = fresh_dir("embed");
  const auto config = load_run_config(make_run(dir).string());
  CHECK_THROWS_AS(cmd_search_embed(config), ConfigError);
}

TEST_CASE("retrain under a different head reuses the artifact") {
  const auto dir = fresh_dir("transfer");
  auto config = load_run_config(make_run(dir).string());
  cmd_search_interactions(config);
  cmd_search_embed(config);
  config.search.retrain_head = Head::ipnn;
  const auto report = cmd_retrain(config);
  CHECK(report["head"] == "ipnn");
  CHECK(report["parameter_count"] == report["analytic_parameter_count"]);
}

TEST_CASE("synth output is fixed by the seed") {
  const auto dir = fresh_dir("synth");
  SynthConfig c;
  c.fields = 4;
  c.rows = 500;
  c.seed = 2;
  const auto manifest = cmd_synth(c, (dir / "a").string());
  cmd_synth(c, (dir / "b").string());
  CHECK(slurp(dir / "a" / "data.svm") == slurp(dir / "b" / "data.svm"));
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  const auto pairs = enumerate_second_order(4);
  for (const auto& p : manifest["planted"]) {
    auto f = p["fields"].get<std::vector<std::size_t>>();
    CHECK(std::find(pairs.begin(), pairs.end(), InteractionTuple({f[0] - 1, f[1] - 1})) != pairs.end());
  }
  c.seed = 3;
  cmd_synth(c, (dir / "c").string());
  CHECK(slurp(dir / "a" / "data.svm") != slurp(dir / "c" / "data.svm"));
}

TEST_CASE("stats-auc reports every pair by default") {
  const auto dir = fresh_dir("stats");
  const auto config = load_run_config(make_run(dir).string());
  const auto all = cmd_stats_auc(config, {});
  CHECK(all["tuples"].size() == 10);
  const auto one = cmd_stats_auc(config, {{1, 2}});
  CHECK(one["tuples"][0]["statistics_auc"] == all["tuples"][0]["statistics_auc"]);
  CHECK_THROWS_AS(cmd_stats_auc(config, {{1, 9}}), ConfigError);
}

TEST_CASE("the aim executable maps failures to exit codes") {
  const auto dir = fresh_dir("exit");
  const auto cfg = make_run(dir).string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("run -c /nonexistent.ini") == 2);
  CHECK(run_cli("run") == 2);
  CHECK(run_cli("run -c " + cfg + " --set data.path=/nonexistent.svm") == 2);
  CHECK(run_cli("run -c " + cfg + " --set model.nonsense=1") == 2);
  CHECK(run_cli("search-interactions -c " + cfg) == 0);
  CHECK(run_cli("search-embed -c " + cfg + " --set stage2.grda_lr=50 --set stage2.grda_c=10") == 3);
  CHECK(run_cli("search-embed -c " + cfg) == 0);
  CHECK(run_cli("retrain -c " + cfg) == 0);
  CHECK(run_cli("evaluate --checkpoint " + (dir / "out" / "retrain" / "checkpoint.json").string() + " --data " +
                (dir / "syn" / "data.svm").string()) == 0);
  CHECK(run_cli("evaluate --checkpoint /nonexistent.json --data " + (dir / "syn" / "data.svm").string()) == 2);
}
