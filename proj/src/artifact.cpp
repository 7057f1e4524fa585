#include "aim/artifact.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aim/error.hpp"

namespace aim {

void sort_pairs(std::vector<SelectedPair>& pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const SelectedPair& a, const SelectedPair& b) {
    const double ma = std::abs(a.alpha), mb = std::abs(b.alpha);
    if (ma != mb) return ma > mb;
    if (a.tuple != b.tuple) return a.tuple < b.tuple;
    return a.kind < b.kind;
  });
}

void SearchArtifact::validate(const FieldSchema* schema) const {
  if (embedding_dim == 0) throw ValidationError("artifact: embedding_dim must be positive");
  const std::size_t n = retained.size();
  if (schema) {
    if (schema->field_count() != n) {
      throw ValidationError("artifact has " + std::to_string(n) + " fields but the dataset has " +
                            std::to_string(schema->field_count()));
    }
    if (!schema_hash.empty() && schema->hash() != schema_hash) {
      throw ValidationError("artifact schema hash does not match the dataset");
    }
  }
  for (std::size_t f = 0; f < n; ++f) {
    const auto& phi = retained[f];
    for (std::size_t k = 0; k < phi.size(); ++k) {
      if (phi[k] >= embedding_dim || (k > 0 && phi[k] <= phi[k - 1])) {
        throw ValidationError("artifact: field " + std::to_string(f + 1) + " has an invalid position set");
      }
    }
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.alpha == 0.0 || !std::isfinite(p.alpha)) throw ValidationError("artifact: pair " + p.tuple.str() + " has alpha 0");
    if (p.kind == IfKind::kernel_matrix && p.tuple.order() != 2) {
      throw ValidationError("artifact: kernel_matrix pair of order " + std::to_string(p.tuple.order()));
    }
    for (auto f : p.tuple.fields()) {
      if (f >= n) throw ValidationError("artifact: pair " + p.tuple.str() + " references an unknown field");
      if (retained[f].empty()) {
        throw ValidationError("artifact: pair " + p.tuple.str() + " uses a field with no embedding dimensions");
      }
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (pairs[j].tuple == p.tuple && pairs[j].kind == p.kind) throw ValidationError("artifact: duplicate pair");
    }
  }
}

nlohmann::ordered_json SearchArtifact::to_json() const {
  nlohmann::ordered_json doc;
  doc["schema_hash"] = schema_hash;
  auto& pair_list = doc["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : pairs) {
    nlohmann::ordered_json entry;
    auto fields = nlohmann::ordered_json::array();
    for (auto f : p.tuple.fields()) fields.push_back(f + 1);
    entry["fields"] = fields;
    entry["if"] = if_kind_name(p.kind);
    entry["alpha"] = p.alpha;
    pair_list.push_back(entry);
  }
  auto& field_list = doc["fields"] = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < retained.size(); ++f) {
    auto phi = nlohmann::ordered_json::array();
    for (auto k : retained[f]) phi.push_back(k + 1);
    nlohmann::ordered_json entry;
    entry["index"] = f + 1;
    entry["d_i"] = retained[f].size();
    entry["phi"] = phi;
    entry["map"] = phi;
    field_list.push_back(entry);
  }
  auto prov = provenance;
  prov["embedding_dim"] = embedding_dim;
  doc["provenance"] = prov;
  return doc;
}

SearchArtifact SearchArtifact::from_json(const nlohmann::json& doc) {
  SearchArtifact a;
  try {
    a.schema_hash = doc.at("schema_hash").get<std::string>();
    const auto& prov = doc.at("provenance");
    a.embedding_dim = prov.at("embedding_dim").get<std::size_t>();
    a.provenance = nlohmann::ordered_json::parse(prov.dump());
    a.provenance.erase("embedding_dim");
    for (const auto& entry : doc.at("fields")) {
      const auto index = entry.at("index").get<std::size_t>();
      if (index != a.retained.size() + 1) throw ValidationError("artifact: fields must be listed in order");
      const auto phi = entry.at("phi").get<std::vector<std::size_t>>();
      const auto map = entry.at("map").get<std::vector<std::size_t>>();
      if (entry.at("d_i").get<std::size_t>() != phi.size() || map != phi) {
        throw ValidationError("artifact: field " + std::to_string(index) + " has inconsistent d_i/phi/map");
      }
      std::vector<std::size_t> zero_based;
      for (auto k : phi) {
        if (k == 0) throw ValidationError("artifact: positions are 1-based");
        zero_based.push_back(k - 1);
      }
      a.retained.push_back(std::move(zero_based));
    }
    for (const auto& entry : doc.at("pairs")) {
      std::vector<std::size_t> fields;
      for (auto f : entry.at("fields").get<std::vector<std::size_t>>()) {
        if (f == 0) throw ValidationError("artifact: field indices are 1-based");
        fields.push_back(f - 1);
      }
      a.pairs.push_back({InteractionTuple(fields), parse_if_kind(entry.at("if").get<std::string>()),
                         entry.at("alpha").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("artifact: ") + e.what());
  }
  a.validate();
  return a;
}

std::string SearchArtifact::dump() const { return to_json().dump(2) + "\n"; }

SearchArtifact SearchArtifact::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open artifact '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("artifact '" + path + "': " + e.what());
  }
  return from_json(doc);
}

void SearchArtifact::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write artifact '" + path + "'");
  out << dump();
}

std::vector<double> scatter(std::span<const double> compact, std::span<const std::size_t> phi, std::size_t dim) {
  if (compact.size() != phi.size()) throw ValidationError("scatter: width mismatch");
  std::vector<double> out(dim, 0.0);
  for (std::size_t r = 0; r < phi.size(); ++r) out.at(phi[r]) = compact[r];
  return out;
}

std::vector<double> gather(std::span<const double> wide, std::span<const std::size_t> phi) {
  std::vector<double> out;
  out.reserve(phi.size());
  for (auto k : phi) out.push_back(wide[k]);
  return out;
}

}  // namespace aim
