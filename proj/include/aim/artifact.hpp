#pragma once

// Serialized outcome of the interaction and dimension searches.
//
// JSON layout:
//   { "schema_hash": "...",
//     "pairs":  [ {"fields": [1,2], "if": "inner", "alpha": 0.31}, ... ],
//     "fields": [ {"index": 1, "d_i": 3, "phi": [1,2,4], "map": [1,2,4]}, ... ],
//     "provenance": { ... } }
// Field indices and positions are 1-based on disk. "map" lists the original
// position held by each compact slot, so it always equals "phi".

#include <cstddef>
#include <string>
#include <vector>

#include "aim/data.hpp"
#include "aim/interactions.hpp"
#include "json.hpp"

namespace aim {

struct SelectedPair {
  InteractionTuple tuple;
  IfKind kind = IfKind::inner;
  double alpha = 0.0;

  bool operator==(const SelectedPair&) const = default;
};

// |alpha| descending, then tuple, then kind.
void sort_pairs(std::vector<SelectedPair>& pairs);

struct SearchArtifact {
  std::string schema_hash;
  std::size_t embedding_dim = 0;
  std::vector<SelectedPair> pairs;
  std::vector<std::vector<std::size_t>> retained;  // per field, 0-based, strictly increasing
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();

  std::size_t field_count() const { return retained.size(); }
  std::size_t dims(std::size_t field) const { return retained.at(field).size(); }

  // Throws ValidationError when an invariant does not hold; with a schema,
  // also checks the field count and schema hash.
  void validate(const FieldSchema* schema = nullptr) const;

  nlohmann::ordered_json to_json() const;
  static SearchArtifact from_json(const nlohmann::json& doc);
  std::string dump() const;
  static SearchArtifact load(const std::string& path);
  void save(const std::string& path) const;
};

// Widens a compact vector of width |phi| to width d, zero elsewhere.
std::vector<double> scatter(std::span<const double> compact, std::span<const std::size_t> phi, std::size_t dim);
// Inverse of scatter on the retained coordinates.
std::vector<double> gather(std::span<const double> wide, std::span<const std::size_t> phi);

}  // namespace aim
