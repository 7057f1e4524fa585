#pragma once

// Run configuration: an INI file with one section per concern.
//
//   [data]    path, format (svm|delimited), train, valid, test, split_seed
//   [model]   head, max_order, kinds, embedding_dim, mlp_widths,
//             embedding_mode, batch_norm, bn_epsilon, bn_momentum, init_std
//   [train]   batch_size, seed
//   [stage1] [stage2] [retrain]
//             epochs, adam_lr, grda_lr, grda_c, grda_mu
//   [retrain] head, mlp_widths (in addition to the keys above)
//   [output]  dir
//
// Lists are comma separated. Unknown sections or keys are rejected so a
// misspelt key cannot silently fall back to its default.

#include <cstdint>
#include <string>
#include <vector>

#include "aim/data.hpp"
#include "aim/search.hpp"
#include "json.hpp"

namespace aim {

struct RunConfig {
  std::string data_path;
  DataFormat format = DataFormat::svm_light;
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t split_seed = 1;
  SearchSettings search;
  std::string output_dir = "run";

  // Throws ConfigError on out-of-range values; with check_paths, also when
  // the dataset file does not exist.
  void validate(bool check_paths = true) const;
  nlohmann::ordered_json to_json() const;
};

// Parses INI text; overrides are "section.key=value" strings applied after
// the file.
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

// The documented key list with default values, as printed by --help.
std::string config_reference();

}  // namespace aim
