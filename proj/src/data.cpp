#include "aim/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aim/error.hpp"
#include "aim/rng.hpp"

namespace aim {

namespace {

constexpr const char* kOovToken = "<oov>";

std::string at_line(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string_view strip_comment(std::string_view s) {
  const auto hash = s.find('#');
  return hash == std::string_view::npos ? s : s.substr(0, hash);
}

int parse_label(std::string_view token, std::size_t line) {
  long long value = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    // Accept "1.0" / "0.0" style labels.
    double real = 0.0;
    auto [rptr, rec] = std::from_chars(token.data(), end, real);
    if (rec != std::errc() || rptr != end) {
      throw ParseError(at_line(line, "bad label '" + std::string(token) + "'"));
    }
    if (real != 0.0 && real != 1.0) {
      throw ValidationError(at_line(line, "label must be 0 or 1, got " + std::string(token)));
    }
    return real == 1.0 ? 1 : 0;
  }
  if (value != 0 && value != 1) {
    throw ValidationError(at_line(line, "label must be 0 or 1, got " + std::string(token)));
  }
  return static_cast<int>(value);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_on(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Dataset load_svm_light(std::istream& in, const Vocabulary* frozen) {
  DatasetBuilder builder = frozen ? DatasetBuilder(*frozen) : DatasetBuilder(0);
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::vector<std::string>> tokens;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto parts = split_ws(line);
    const int label = parse_label(parts[0], line_no);
    for (auto& t : tokens) t.clear();
    for (std::size_t k = 1; k < parts.size(); ++k) {
      const auto tok = parts[k];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(at_line(line_no, "expected field:featureid, got '" + std::string(tok) + "'"));
      }
      unsigned long long field = 0, feature = 0;
      const auto fpart = tok.substr(0, colon);
      const auto vpart = tok.substr(colon + 1);
      auto [fp, fec] = std::from_chars(fpart.data(), fpart.data() + fpart.size(), field);
      auto [vp, vec] = std::from_chars(vpart.data(), vpart.data() + vpart.size(), feature);
      if (fec != std::errc() || fp != fpart.data() + fpart.size() || vec != std::errc() ||
          vp != vpart.data() + vpart.size() || fpart.empty() || vpart.empty()) {
        throw ParseError(at_line(line_no, "expected integer field:featureid, got '" + std::string(tok) + "'"));
      }
      if (field == 0) throw ParseError(at_line(line_no, "field indices are 1-based"));
      if (frozen) {
        if (field > frozen->field_count()) {
          throw ValidationError(at_line(line_no, "field " + std::to_string(field) + " not in schema"));
        }
      } else {
        builder.ensure_fields(field);
      }
      if (tokens.size() < builder.field_count()) tokens.resize(builder.field_count());
      tokens[field - 1].push_back(std::to_string(feature));
    }
    tokens.resize(builder.field_count());
    builder.add(label, tokens);
  }
  if (builder.size() == 0) throw ValidationError("no instances");
  return std::move(builder).build();
}

Dataset load_delimited(std::istream& in, const Vocabulary* frozen) {
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_text;
  char delim = ',';
  while (header.empty() && std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    header_text = std::string(line);
    delim = header_text.find('\t') != std::string::npos ? '\t' : ',';
    header = split_on(header_text, delim);
  }
  if (header.empty()) throw ValidationError("no instances");
  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (trim(header[c]) == "label") label_col = c;
  }
  if (label_col == header.size()) throw ParseError(at_line(line_no, "header has no 'label' column"));
  const std::size_t fields = header.size() - 1;
  if (frozen && frozen->field_count() != fields) {
    throw ValidationError("column count does not match the vocabulary field count");
  }
  DatasetBuilder builder = frozen ? DatasetBuilder(*frozen) : DatasetBuilder(fields);
  std::vector<std::vector<std::string>> tokens(fields);
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto cells = split_on(line, delim);
    if (cells.size() != header.size()) {
      throw ParseError(at_line(line_no, "expected " + std::to_string(header.size()) + " columns, got " +
                                            std::to_string(cells.size())));
    }
    int label = 0;
    std::size_t f = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      if (c == label_col) {
        label = parse_label(cell, line_no);
        continue;
      }
      tokens[f].clear();
      if (!cell.empty()) {
        for (auto part : split_on(cell, '|')) {
          part = trim(part);
          if (!part.empty()) tokens[f].emplace_back(part);
        }
      }
      ++f;
    }
    builder.add(label, tokens);
  }
  if (builder.size() == 0) throw ValidationError("no instances");
  return std::move(builder).build();
}

}  // namespace

void FieldSchema::validate() const {
  if (vocab_sizes.empty()) throw ValidationError("schema has no fields");
  if (multi_hot.size() != vocab_sizes.size()) {
    throw ValidationError("multi_hot flags must match the field count");
  }
  for (auto h : vocab_sizes) {
    if (h < 1) throw ValidationError("vocabulary sizes must be >= 1");
  }
}

std::string FieldSchema::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(vocab_sizes.size());
  for (std::size_t i = 0; i < vocab_sizes.size(); ++i) {
    feed(vocab_sizes[i]);
    feed(multi_hot[i] ? 1 : 0);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Vocabulary::Vocabulary(std::size_t field_count) {
  for (std::size_t f = 0; f < field_count; ++f) add_field();
}

void Vocabulary::add_field() {
  index_.emplace_back();
  tokens_.push_back({kOovToken});
}

FeatureId Vocabulary::intern(std::size_t field, std::string_view token) {
  auto& index = index_.at(field);
  const std::string key(token);
  auto it = index.find(key);
  if (it != index.end()) return it->second;
  const auto id = static_cast<FeatureId>(tokens_[field].size());
  tokens_[field].push_back(key);
  index.emplace(key, id);
  return id;
}

FeatureId Vocabulary::lookup(std::size_t field, std::string_view token) const {
  const auto& index = index_.at(field);
  auto it = index.find(std::string(token));
  return it == index.end() ? kOovId : it->second;
}

const std::string& Vocabulary::token(std::size_t field, FeatureId id) const {
  return tokens_.at(field).at(id);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::vector<std::string>> tokens) {
  Vocabulary v;
  for (auto& field : tokens) {
    if (field.empty()) throw ValidationError("vocabulary field without OOV slot");
    v.add_field();
    auto& dst = v.tokens_.back();
    auto& index = v.index_.back();
    for (std::size_t id = 1; id < field.size(); ++id) {
      index.emplace(field[id], static_cast<FeatureId>(id));
      dst.push_back(std::move(field[id]));
    }
  }
  return v;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid" || name == "validation") return Split::valid;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

DataFormat parse_format(std::string_view name) {
  if (name == "svm" || name == "svm-light" || name == "svmlight") return DataFormat::svm_light;
  if (name == "delimited" || name == "csv" || name == "tsv") return DataFormat::delimited;
  throw ConfigError("unknown data format '" + std::string(name) + "'");
}

Dataset Dataset::from_instances(FieldSchema schema, std::span<const Instance> instances,
                                Vocabulary vocabulary) {
  schema.validate();
  if (instances.empty()) throw ValidationError("no instances");
  const std::size_t n = schema.field_count();
  Dataset ds;
  ds.labels_.reserve(instances.size());
  ds.offsets_.reserve(instances.size() * n + 1);
  ds.offsets_.push_back(0);
  for (std::size_t row = 0; row < instances.size(); ++row) {
    const auto& inst = instances[row];
    if (inst.label != 0 && inst.label != 1) {
      throw ValidationError("instance " + std::to_string(row) + ": label must be 0 or 1");
    }
    if (inst.ids.size() != n) {
      throw ValidationError("instance " + std::to_string(row) + ": wrong field count");
    }
    ds.labels_.push_back(static_cast<std::uint8_t>(inst.label));
    for (std::size_t f = 0; f < n; ++f) {
      const auto& ids = inst.ids[f];
      if (ids.empty() || (!schema.multi_hot[f] && ids.size() != 1)) {
        throw ValidationError("instance " + std::to_string(row) + ": field " + std::to_string(f + 1) +
                              " must carry exactly one id");
      }
      for (auto id : ids) {
        if (id >= schema.vocab_sizes[f]) {
          throw ValidationError("instance " + std::to_string(row) + ": id " + std::to_string(id) +
                                " out of range for field " + std::to_string(f + 1));
        }
        ds.ids_.push_back(id);
      }
      ds.offsets_.push_back(ds.ids_.size());
    }
  }
  ds.splits_.assign(instances.size(), Split::train);
  ds.schema_ = std::move(schema);
  if (vocabulary.field_count() == 0) vocabulary = Vocabulary(n);
  ds.vocabulary_ = std::move(vocabulary);
  return ds;
}

Instance Dataset::instance(std::size_t row) const {
  Instance inst;
  inst.label = label(row);
  inst.ids.resize(field_count());
  for (std::size_t f = 0; f < field_count(); ++f) {
    const auto s = ids(row, f);
    inst.ids[f].assign(s.begin(), s.end());
  }
  return inst;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits_.size(); ++i) {
    if (splits_[i] == split) out.push_back(i);
  }
  return out;
}

void Dataset::assign_splits(std::vector<Split> splits) {
  if (splits.size() != size()) throw ValidationError("split tags must cover every instance");
  splits_ = std::move(splits);
}

DatasetBuilder::DatasetBuilder(std::size_t field_count) : vocabulary_(field_count) {
  multi_hot_.assign(field_count, false);
}

DatasetBuilder::DatasetBuilder(Vocabulary frozen) : vocabulary_(std::move(frozen)), frozen_(true) {
  multi_hot_.assign(vocabulary_.field_count(), false);
}

void DatasetBuilder::ensure_fields(std::size_t field_count) {
  while (vocabulary_.field_count() < field_count) {
    vocabulary_.add_field();
    multi_hot_.push_back(false);
    // Earlier rows never mentioned the new field: they carry OOV.
    for (auto& inst : instances_) inst.ids.push_back({kOovId});
  }
}

void DatasetBuilder::add(int label, const std::vector<std::vector<std::string>>& tokens) {
  if (tokens.size() != field_count()) throw ValidationError("token row has the wrong field count");
  Instance inst;
  inst.label = label;
  inst.ids.resize(field_count());
  for (std::size_t f = 0; f < field_count(); ++f) {
    auto& ids = inst.ids[f];
    if (tokens[f].empty()) {
      ids.push_back(kOovId);
      continue;
    }
    for (const auto& tok : tokens[f]) {
      ids.push_back(frozen_ ? vocabulary_.lookup(f, tok) : vocabulary_.intern(f, tok));
    }
    if (ids.size() > 1) multi_hot_[f] = true;
  }
  instances_.push_back(std::move(inst));
}

Dataset DatasetBuilder::build() && {
  FieldSchema schema;
  for (std::size_t f = 0; f < field_count(); ++f) schema.vocab_sizes.push_back(vocabulary_.size(f));
  schema.multi_hot = multi_hot_;
  return Dataset::from_instances(std::move(schema), instances_, std::move(vocabulary_));
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format, const Vocabulary* frozen) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path.string() + "'");
  return format == DataFormat::svm_light ? load_svm_light(in, frozen) : load_delimited(in, frozen);
}

Dataset split(Dataset dataset, double train, double valid, double test, std::uint64_t seed) {
  if (!(train > 0 && valid > 0 && test > 0) || std::abs(train + valid + test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must be positive and sum to 1");
  }
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x5e11));
  rng.shuffle(std::span<std::size_t>(order));
  const auto b1 = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(train * n)));
  const auto b2 = std::min<std::size_t>(n, std::max<std::size_t>(b1, std::llround((train + valid) * n)));
  std::vector<Split> tags(n);
  for (std::size_t k = 0; k < n; ++k) {
    tags[order[k]] = k < b1 ? Split::train : (k < b2 ? Split::valid : Split::test);
  }
  dataset.assign_splits(std::move(tags));
  return dataset;
}

BatchStream::BatchStream(std::vector<std::size_t> rows, std::size_t batch_size, std::uint64_t seed)
    : rows_(std::move(rows)), batch_size_(batch_size), seed_(seed) {
  if (batch_size_ < 1) throw ValidationError("batch_size must be >= 1");
}

std::vector<std::vector<std::size_t>> BatchStream::epoch(std::size_t epoch_index) const {
  std::vector<std::size_t> order = rows_;
  Rng rng(mix_seed(seed_, epoch_index));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size_) {
    const auto end = std::min(order.size(), start + batch_size_);
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  return out;
}

}  // namespace aim
