#include "dggan/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dggan/errors.hpp"

namespace dggan {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::pair<double, double> to_pair(const std::string& key, const std::string& value) {
  const auto comma = value.find(',');
  if (comma == std::string::npos) throw ConfigError(key + ": expected 'a,b', got '" + value + "'");
  return {to_double(key, trim(value.substr(0, comma))), to_double(key, trim(value.substr(comma + 1)))};
}

Resolution to_resolution(const std::string& key, const std::string& value) {
  const auto x = value.find('x');
  if (x == std::string::npos) throw ConfigError(key + ": expected HxW, got '" + value + "'");
  return {to_int(key, trim(value.substr(0, x))), to_int(key, trim(value.substr(x + 1)))};
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

struct Field {
  std::string key;
  Setter set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // preset must come first in a file; it overwrites the budget fields
    f.push_back({"preset",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   if (v == "paper") {
                     const bool det = c.train.deterministic;
                     const uint64_t seed = c.train.seed;
                     c.train = TrainConfig::paper_preset();
                     c.train.deterministic = det;
                     c.train.seed = seed;
                   } else if (v == "desk") {
                     c.train = TrainConfig{};
                   } else {
                     throw ConfigError(k + ": expected paper or desk, got '" + v + "'");
                   }
                 },
                 nullptr});
    // dataset
    f.push_back({"source",
                 [](RunConfig& c, const std::string&, const std::string& v) { c.data.source = parse_data_source(v); },
                 [](const RunConfig& c) { return to_string(c.data.source); }});
    f.push_back({"data_seed",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.seed = static_cast<uint64_t>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.data.seed); }});
    f.push_back({"num_sequences",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.num_sequences = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.data.num_sequences); }});
    f.push_back({"frames_per_sequence",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.frames_per_sequence = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.data.frames_per_sequence); }});
    f.push_back({"resolution",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.resolution = to_resolution(k, v); },
                 [](const RunConfig& c) {
                   return std::to_string(c.data.resolution.height) + "x" + std::to_string(c.data.resolution.width);
                 }});
    f.push_back({"window_stride",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.window_stride = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.data.window_stride); }});
    f.push_back({"min_speed",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.min_speed = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.data.min_speed); }});
    f.push_back({"max_speed",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.max_speed = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.data.max_speed); }});
    f.push_back({"min_shapes",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.min_shapes = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.data.min_shapes); }});
    f.push_back({"max_shapes",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.max_shapes = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.data.max_shapes); }});
    f.push_back({"scroll_probability",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.scroll_probability = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.data.scroll_probability); }});
    f.push_back({"max_scroll_speed",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.data.max_scroll_speed = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.data.max_scroll_speed); }});
    f.push_back({"data_dir",
                 [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; },
                 [](const RunConfig& c) { return c.data_dir.string(); }});
    f.push_back({"horizons",
                 [](RunConfig& c, const std::string&, const std::string& v) { c.horizons = parse_int_list(v); },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.horizons.size(); ++i) s += (i ? "," : "") + std::to_string(c.horizons[i]);
                   return s;
                 }});
    // training
    f.push_back({"history",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.history = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.train.history); }});
    f.push_back({"batch_size",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.train.batch_size); }});
    f.push_back({"stage1_lr",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   auto [a, b] = to_pair(k, v);
                   c.train.stage1_lr = {a, b};
                 },
                 [](const RunConfig& c) { return fmt(c.train.stage1_lr.start) + "," + fmt(c.train.stage1_lr.end); }});
    f.push_back({"stage2_lr",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   auto [a, b] = to_pair(k, v);
                   c.train.stage2_lr = {a, b};
                 },
                 [](const RunConfig& c) { return fmt(c.train.stage2_lr.start) + "," + fmt(c.train.stage2_lr.end); }});
    f.push_back({"stage1_epochs",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.stage1_epochs = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.train.stage1_epochs); }});
    f.push_back({"stage2_epochs",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.stage2_epochs = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.train.stage2_epochs); }});
    f.push_back({"lambda",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lambda = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.train.lambda); }});
    f.push_back({"disc_steps_per_gen_step",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   c.train.disc_steps_per_gen_step = static_cast<int>(to_int(k, v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.disc_steps_per_gen_step); }});
    f.push_back({"seed",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = static_cast<uint64_t>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    f.push_back({"adam_betas",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_betas = to_pair(k, v); },
                 [](const RunConfig& c) { return fmt(c.train.adam_betas.first) + "," + fmt(c.train.adam_betas.second); }});
    f.push_back({"base_width",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.base_width = to_int(k, v); },
                 [](const RunConfig& c) { return std::to_string(c.train.base_width); }});
    f.push_back({"leaky_slope",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.leaky_slope = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.train.leaky_slope); }});
    f.push_back({"aux_pixel_loss",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.aux_pixel_loss = to_bool(k, v); },
                 [](const RunConfig& c) { return std::string(c.train.aux_pixel_loss ? "true" : "false"); }});
    f.push_back({"aux_pixel_weight",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.aux_pixel_weight = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.train.aux_pixel_weight); }});
    f.push_back({"deterministic",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.train.deterministic = to_bool(k, v); },
                 [](const RunConfig& c) { return std::string(c.train.deterministic ? "true" : "false"); }});
    return f;
  }();
  return table;
}

bool is_train_key(const std::string& key) {
  static const std::vector<std::string> keys{
      "history", "batch_size", "stage1_lr", "stage2_lr", "stage1_epochs", "stage2_epochs",
      "lambda", "disc_steps_per_gen_step", "seed", "adam_betas", "base_width", "leaky_slope",
      "aux_pixel_loss", "aux_pixel_weight", "deterministic"};
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, key, value);
      return;
    }
  }
  std::string valid;
  for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
  throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
}

RunConfig parse_config(std::istream& in) {
  RunConfig config;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  return parse_config(in);
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& f : fields()) {
    if (f.get) out << f.key << " = " << f.get(config) << "\n";
  }
  return out.str();
}

std::string serialize_train_config(const TrainConfig& train) {
  RunConfig rc;
  rc.train = train;
  std::ostringstream out;
  for (const auto& f : fields()) {
    if (f.get && is_train_key(f.key)) out << f.key << " = " << f.get(rc) << "\n";
  }
  return out.str();
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (item.empty()) continue;
    values.push_back(static_cast<int>(to_int("list", item)));
  }
  return values;
}

}  // namespace dggan
