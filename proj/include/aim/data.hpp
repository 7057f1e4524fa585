#pragma once

// Multi-field categorical datasets: schema, per-field vocabularies, a
// compact instance store, splitting and seeded mini-batch streams.
//
// Every field reserves id 0 for out-of-vocabulary tokens; in-vocabulary ids
// start at 1 and follow first-seen order. Field indices are 0-based in the
// API and 1-based in text formats and artifact files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aim {

using FeatureId = std::uint32_t;
inline constexpr FeatureId kOovId = 0;

struct FieldSchema {
  std::vector<std::size_t> vocab_sizes;  // h_i, including the OOV slot
  std::vector<bool> multi_hot;

  std::size_t field_count() const { return vocab_sizes.size(); }
  void validate() const;
  // FNV-1a over field count, vocabulary sizes and multi-hot flags.
  std::string hash() const;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::size_t field_count);

  std::size_t field_count() const { return tokens_.size(); }
  std::size_t size(std::size_t field) const { return tokens_.at(field).size(); }

  // Returns the id of token, assigning the next id if it is new.
  FeatureId intern(std::size_t field, std::string_view token);
  // Returns kOovId for unknown tokens.
  FeatureId lookup(std::size_t field, std::string_view token) const;
  const std::string& token(std::size_t field, FeatureId id) const;

  // Adds an empty field (only the OOV slot).
  void add_field();
  const std::vector<std::vector<std::string>>& tokens() const { return tokens_; }
  static Vocabulary from_tokens(std::vector<std::vector<std::string>> tokens);

 private:
  std::vector<std::unordered_map<std::string, FeatureId>> index_;
  std::vector<std::vector<std::string>> tokens_;  // tokens_[f][0] is the OOV marker
};

// Owned instance used when building datasets in memory.
struct Instance {
  int label = 0;
  std::vector<std::vector<FeatureId>> ids;  // per field
};

enum class Split : std::uint8_t { train = 0, valid = 1, test = 2 };
const char* split_name(Split split);
Split parse_split(std::string_view name);

enum class DataFormat { svm_light, delimited };
DataFormat parse_format(std::string_view name);

class Dataset {
 public:
  Dataset() = default;

  // Validates every instance against schema. All instances start in train.
  static Dataset from_instances(FieldSchema schema, std::span<const Instance> instances,
                                Vocabulary vocabulary = {});

  const FieldSchema& schema() const { return schema_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t field_count() const { return schema_.field_count(); }

  int label(std::size_t row) const { return labels_[row]; }
  std::span<const FeatureId> ids(std::size_t row, std::size_t field) const {
    const std::size_t slot = row * field_count() + field;
    return {ids_.data() + offsets_[slot], ids_.data() + offsets_[slot + 1]};
  }
  Instance instance(std::size_t row) const;

  Split split_of(std::size_t row) const { return splits_[row]; }
  std::vector<std::size_t> indices(Split split) const;
  void assign_splits(std::vector<Split> splits);

 private:
  FieldSchema schema_;
  Vocabulary vocabulary_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::size_t> offsets_;  // size() * field_count() + 1 entries
  std::vector<FeatureId> ids_;
  std::vector<Split> splits_;
};

// Accumulates raw token rows, interning through a vocabulary. With a frozen
// vocabulary unknown tokens map to kOovId instead of growing it.
class DatasetBuilder {
 public:
  explicit DatasetBuilder(std::size_t field_count);
  explicit DatasetBuilder(Vocabulary frozen);

  // tokens[f] lists the raw tokens of field f; an empty list encodes OOV.
  void add(int label, const std::vector<std::vector<std::string>>& tokens);
  std::size_t size() const { return instances_.size(); }
  std::size_t field_count() const { return vocabulary_.field_count(); }
  // Grows the field count (svm-light files reveal fields as they are read).
  void ensure_fields(std::size_t field_count);

  Dataset build() &&;

 private:
  Vocabulary vocabulary_;
  bool frozen_ = false;
  std::vector<Instance> instances_;
  std::vector<bool> multi_hot_;
};

// Reads `label field:featureid ...` (svm-light) or header-led delimited
// columns. Throws ParseError with a line number on malformed input and
// ValidationError for labels outside {0,1} or an empty file.
Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const Vocabulary* frozen = nullptr);

// Deterministic train/valid/test assignment. Fractions must be positive and
// sum to 1 within 1e-9.
Dataset split(Dataset dataset, double train, double valid, double test, std::uint64_t seed);

// Seeded mini-batches over one split; each epoch is a fresh permutation and
// the final partial batch is kept.
class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> rows, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;
  std::size_t batch_size() const { return batch_size_; }
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::size_t> rows_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace aim
