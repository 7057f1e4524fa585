// aim: interaction, interaction-function and embedding-dimension search for
// factorization CTR models.
//
// Exit codes: 0 success, 2 configuration or input error, 3 runtime error
// (including a collapsed dimension search).

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aim/commands.hpp"
#include "aim/error.hpp"

namespace {

struct RunArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

void add_run_args(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("-c,--config", args.config, "INI run configuration (optional; -s can supply every key)");
  cmd->add_option("-s,--set", args.overrides, "Override a config key: section.key=value (repeatable)");
  cmd->add_option("-o,--out", args.out, "Run directory (overrides output.dir)");
}

aim::RunConfig load(const RunArgs& args) {
  auto config = args.config.empty() ? aim::parse_run_config("", args.overrides)
                                    : aim::load_run_config(args.config, args.overrides);
  if (!args.out.empty()) config.output_dir = args.out;
  return config;
}

std::vector<std::size_t> parse_fields(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw aim::ConfigError("bad field list '" + text + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interaction, interaction-function and embedding-dimension search for FM, DeepFM and IPNN"};
  app.footer("\n" + aim::config_reference());
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress per-epoch progress on stderr");

  aim::SynthConfig synth;
  std::string synth_out;
  std::size_t hub = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with planted interactions");
  synth_cmd->add_option("-o,--out", synth_out, "Output directory for data.svm and manifest.json")->required();
  synth_cmd->add_option("--fields", synth.fields, "Number of fields")->capture_default_str();
  synth_cmd->add_option("--vocab", synth.vocab, "Tokens per field")->capture_default_str();
  synth_cmd->add_option("--planted", synth.planted, "Planted tuples")->capture_default_str();
  synth_cmd->add_option("--order", synth.order, "Order of planted tuples")->capture_default_str();
  synth_cmd->add_option("--rows", synth.rows, "Instances")->capture_default_str();
  synth_cmd->add_option("--rank", synth.rank, "Factor rank of planted effects")->capture_default_str();
  synth_cmd->add_option("--interaction-scale", synth.interaction_scale, "Planted coefficient magnitude")
      ->capture_default_str();
  synth_cmd->add_option("--first-order-scale", synth.first_order_scale, "Std of per-token weights")
      ->capture_default_str();
  synth_cmd->add_option("--positive-ratio", synth.positive_ratio, "Target click rate")->capture_default_str();
  synth_cmd->add_option("--noise-fields", synth.noise_fields, "Trailing fields with no signal")
      ->capture_default_str();
  synth_cmd->add_option("--hub", hub, "1-based field contained in every planted tuple");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();

  RunArgs s1, s2, rt, run, stats;
  auto* s1_cmd = app.add_subcommand("search-interactions", "Stage 1: interaction and IF search");
  add_run_args(s1_cmd, s1);
  auto* s2_cmd = app.add_subcommand("search-embed", "Stage 2: embedding-dimension search; writes artifact.json");
  add_run_args(s2_cmd, s2);
  std::string artifact;
  auto* rt_cmd = app.add_subcommand("retrain", "Stage 3: re-train the searched architecture");
  add_run_args(rt_cmd, rt);
  rt_cmd->add_option("-a,--artifact", artifact, "Artifact to re-train (default <run dir>/artifact.json)");
  auto* run_cmd = app.add_subcommand("run", "All three stages in sequence");
  add_run_args(run_cmd, run);

  std::string checkpoint, data_path, split = "test", format;
  auto* eval_cmd = app.add_subcommand("evaluate", "Metrics of a checkpoint on one split of a dataset");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  eval_cmd->add_option("--data", data_path, "Dataset file")->required();
  eval_cmd->add_option("--split", split, "train, valid, test or all")->capture_default_str();
  eval_cmd->add_option("--format", format, "svm or delimited (default: as recorded in the checkpoint)");

  std::vector<std::string> tuples;
  auto* stats_cmd = app.add_subcommand("stats-auc", "statistics_AUC of field tuples (test split)");
  add_run_args(stats_cmd, stats);
  stats_cmd->add_option("-t,--tuple", tuples, "Comma-separated 1-based fields (repeatable; default: all pairs)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::ostream* log = quiet ? nullptr : &std::cerr;
  try {
    nlohmann::ordered_json out;
    if (*synth_cmd) {
      if (synth_cmd->count("--hub")) {
        if (hub == 0) throw aim::ConfigError("--hub is 1-based");
        synth.use_hub = true;
        synth.hub = hub - 1;
      }
      out = aim::cmd_synth(synth, synth_out);
    } else if (*s1_cmd) {
      out = aim::cmd_search_interactions(load(s1), log);
    } else if (*s2_cmd) {
      out = aim::cmd_search_embed(load(s2), log);
    } else if (*rt_cmd) {
      out = aim::cmd_retrain(load(rt), artifact, log);
    } else if (*run_cmd) {
      out = aim::cmd_run(load(run), log);
    } else if (*eval_cmd) {
      out = aim::cmd_evaluate(checkpoint, data_path, split,
                              format.empty() ? std::nullopt : std::optional<std::string>(format));
    } else if (*stats_cmd) {
      std::vector<std::vector<std::size_t>> list;
      for (const auto& t : tuples) list.push_back(parse_fields(t));
      out = aim::cmd_stats_auc(load(stats), list);
    }
    std::cout << out.dump() << std::endl;
    return 0;
  } catch (const aim::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const aim::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const aim::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const aim::SearchCollapsed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
