#pragma once

// JSON checkpoints of a model: configuration, schema, vocabulary, gate
// groups, every parameter with its optimizer state, BN statistics and the
// RNG state. Doubles are written in shortest round-trip form, so a
// save/load cycle reproduces every value bit for bit.

#include <string>

#include "aim/data.hpp"
#include "aim/model.hpp"
#include "json.hpp"

namespace aim {

nlohmann::ordered_json model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

nlohmann::ordered_json checkpoint_json(const Model& model, const Vocabulary& vocabulary,
                                       const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());

struct LoadedCheckpoint {
  Model model;
  Vocabulary vocabulary;
  nlohmann::json meta;
};

LoadedCheckpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocabulary,
                     const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace aim
