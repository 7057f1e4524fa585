#pragma once

// Command implementations behind the `aim` executable. Each command writes
// its files under the run directory and returns a JSON summary; none of the
// written JSON carries wall-clock data, so fixed seeds give identical bytes.
//
// Run directory layout:
//   stage1/{checkpoint.json, report.json, epochs.jsonl}
//   stage2/{checkpoint.json, report.json, epochs.jsonl}
//   artifact.json
//   retrain/{checkpoint.json, report.json}
//   metrics.jsonl

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aim/config.hpp"
#include "aim/synth.hpp"
#include "json.hpp"

namespace aim {

// Loads and splits the configured dataset.
Dataset load_run_data(const RunConfig& config);

nlohmann::ordered_json cmd_synth(const SynthConfig& config, const std::string& out_dir);

nlohmann::ordered_json cmd_search_interactions(const RunConfig& config, std::ostream* log = nullptr);

// Reads stage1/report.json from the run directory.
nlohmann::ordered_json cmd_search_embed(const RunConfig& config, std::ostream* log = nullptr);

// artifact_path defaults to <run dir>/artifact.json when empty.
nlohmann::ordered_json cmd_retrain(const RunConfig& config, const std::string& artifact_path = "",
                                   std::ostream* log = nullptr);

// split is train, valid, test or all. The split assignment and data format
// recorded in the checkpoint are reused; format overrides the latter.
nlohmann::ordered_json cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                                    const std::string& split, const std::optional<std::string>& format = {});

// All three stages in sequence.
nlohmann::ordered_json cmd_run(const RunConfig& config, std::ostream* log = nullptr);

// statistics_AUC of each tuple (1-based fields) on the test split from
// train-split CTRs; every second-order tuple when tuples is empty.
nlohmann::ordered_json cmd_stats_auc(const RunConfig& config, const std::vector<std::vector<std::size_t>>& tuples);

}  // namespace aim
