#include "aim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "aim/error.hpp"

namespace aim {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::set<std::string> stage{"epochs", "adam_lr", "grda_lr", "grda_c", "grda_mu"};
  static const std::map<std::string, std::set<std::string>> keys = [] {
    std::map<std::string, std::set<std::string>> k{
        {"data", {"path", "format", "train", "valid", "test", "split_seed"}},
        {"model",
         {"head", "max_order", "kinds", "embedding_dim", "mlp_widths", "embedding_mode", "batch_norm", "bn_epsilon",
          "bn_momentum", "init_std"}},
        {"train", {"batch_size", "seed"}},
        {"stage1", stage},
        {"stage2", stage},
        {"retrain", stage},
        {"output", {"dir"}}};
    k["retrain"].insert({"head", "mlp_widths"});
    return k;
  }();
  return keys;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T number(const std::string& key, const std::string& text) {
  T value{};
  const auto s = trim(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

bool boolean(const std::string& key, const std::string& text) {
  const auto s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

std::vector<std::size_t> widths(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& w : split_list(text)) out.push_back(number<std::size_t>(key, w));
  return out;
}

// Translates library validation failures on user input into ConfigError.
template <class F>
auto as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

void apply(RunConfig& c, const std::string& section, const std::string& key, const std::string& value) {
  const auto sec = known_keys().find(section);
  if (sec == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
  if (!sec->second.contains(key)) throw ConfigError("unknown config key " + section + "." + key);
  const std::string name = section + "." + key;
  auto& m = c.search.model;

  if (section == "data") {
    if (key == "path") c.data_path = trim(value);
    if (key == "format") c.format = as_config(name, [&] { return parse_format(trim(value)); });
    if (key == "train") c.train_fraction = number<double>(name, value);
    if (key == "valid") c.valid_fraction = number<double>(name, value);
    if (key == "test") c.test_fraction = number<double>(name, value);
    if (key == "split_seed") c.split_seed = number<std::uint64_t>(name, value);
  } else if (section == "model") {
    if (key == "head") m.head = as_config(name, [&] { return parse_head(trim(value)); });
    if (key == "max_order") m.max_order = number<std::size_t>(name, value);
    if (key == "kinds") {
      m.kinds.clear();
      for (const auto& k : split_list(value)) m.kinds.push_back(as_config(name, [&] { return parse_if_kind(k); }));
    }
    if (key == "embedding_dim") m.embedding_dim = number<std::size_t>(name, value);
    if (key == "mlp_widths") m.mlp_widths = widths(name, value);
    if (key == "embedding_mode") {
      m.embedding_mode = as_config(name, [&] { return parse_embedding_mode(trim(value)); });
    }
    if (key == "batch_norm") m.batch_norm = boolean(name, value);
    if (key == "bn_epsilon") m.bn_epsilon = number<double>(name, value);
    if (key == "bn_momentum") m.bn_momentum = number<double>(name, value);
    if (key == "init_std") m.embedding_init_std = number<double>(name, value);
  } else if (section == "train") {
    if (key == "batch_size") c.search.batch_size = number<std::size_t>(name, value);
    if (key == "seed") c.search.seed = number<std::uint64_t>(name, value);
  } else if (section == "output") {
    c.output_dir = trim(value);
  } else {
    StageOptions& s = section == "stage1" ? c.search.stage1 : section == "stage2" ? c.search.stage2 : c.search.retrain;
    if (key == "epochs") s.epochs = number<std::size_t>(name, value);
    if (key == "adam_lr") s.optim.adam.lr = number<double>(name, value);
    if (key == "grda_lr") s.optim.grda.lr = number<double>(name, value);
    if (key == "grda_c") s.optim.grda.c = number<double>(name, value);
    if (key == "grda_mu") s.optim.grda.mu = number<double>(name, value);
    if (key == "head") c.search.retrain_head = as_config(name, [&] { return parse_head(trim(value)); });
    if (key == "mlp_widths") c.search.retrain_mlp_widths = widths(name, value);
  }
}

nlohmann::ordered_json stage_json(const StageOptions& s) {
  return {{"epochs", s.epochs},
          {"adam_lr", s.optim.adam.lr},
          {"grda_lr", s.optim.grda.lr},
          {"grda_c", s.optim.grda.c},
          {"grda_mu", s.optim.grda.mu}};
}

}  // namespace

void RunConfig::validate(bool check_paths) const {
  if (data_path.empty()) throw ConfigError("data.path is required");
  if (check_paths && !std::filesystem::is_regular_file(data_path)) {
    throw ConfigError("dataset '" + data_path + "' does not exist");
  }
  for (double f : {train_fraction, valid_fraction, test_fraction}) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
  }
  if (std::abs(train_fraction + valid_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
  as_config("config", [&] {
    search.validate();
    return 0;
  });
}

nlohmann::ordered_json RunConfig::to_json() const {
  const auto& m = search.model;
  nlohmann::ordered_json j;
  j["data"] = {{"path", data_path},
               {"format", format == DataFormat::svm_light ? "svm" : "delimited"},
               {"train", train_fraction},
               {"valid", valid_fraction},
               {"test", test_fraction},
               {"split_seed", split_seed}};
  auto kinds = nlohmann::ordered_json::array();
  for (auto k : m.kinds) kinds.push_back(if_kind_name(k));
  j["model"] = {{"head", head_name(m.head)},
                {"max_order", m.max_order},
                {"kinds", kinds},
                {"embedding_dim", m.embedding_dim},
                {"mlp_widths", m.mlp_widths},
                {"embedding_mode", embedding_mode_name(m.embedding_mode)},
                {"batch_norm", m.batch_norm},
                {"bn_epsilon", m.bn_epsilon},
                {"bn_momentum", m.bn_momentum},
                {"init_std", m.embedding_init_std}};
  j["train"] = {{"batch_size", search.batch_size}, {"seed", search.seed}};
  j["stage1"] = stage_json(search.stage1);
  j["stage2"] = stage_json(search.stage2);
  j["retrain"] = stage_json(search.retrain);
  j["retrain"]["head"] = head_name(search.retrain_head);
  j["retrain"]["mlp_widths"] = search.retrain_mlp_widths;
  j["output"] = {{"dir", output_dir}};
  return j;
}

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' outside a section");
    for (const auto& [key, value] : body) apply(config, section, key, value.data());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override '" + o + "' is not section.key=value");
    }
    apply(config, trim(o.substr(0, dot)), trim(o.substr(dot + 1, eq - dot - 1)), o.substr(eq + 1));
  }
  return config;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), overrides);
}

std::string config_reference() {
  std::ostringstream out;
  const RunConfig d;
  const auto j = d.to_json();
  out << "Config keys (INI sections) and defaults:\n";
  for (const auto& [section, body] : j.items()) {
    out << "  [" << section << "]\n";
    for (const auto& [key, value] : body.items()) {
      std::string text;
      if (value.is_array()) {
        for (const auto& v : value) text += (text.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      } else {
        text = value.is_string() ? value.get<std::string>() : value.dump();
      }
      out << "    " << key << " = " << (key == "path" ? "<required>" : text) << "\n";
    }
  }
  return out.str();
}

}  // namespace aim
