#pragma once

// Minimal TOML-style key/value files: [section] headers, `key = value`
// lines, '#' comments, strings, numbers, booleans and (nested) arrays.
// Arrays may span several lines.

#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pvdiff/error.hpp"
#include "pvdiff/pipeline.hpp"
#include "pvdiff/timeutil.hpp"

namespace pvdiff {

struct ConfigValue {
  enum class Kind { boolean, number, string, array } kind = Kind::string;
  std::string text;  // number text, string contents or "true"/"false"
  std::vector<ConfigValue> items;
  int line = 0;
};

class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "config") {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section, pending;
    int line_no = 0, pending_line = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = strip_comment(line);
      if (!pending.empty()) {
        pending += ' ' + line;
        if (!balanced(pending)) continue;
        line = pending;
        pending.clear();
      } else {
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.find('=') == std::string::npos) {
          if (line.back() != ']') throw cfg.error(line_no, "malformed section header");
          section = trim(line.substr(1, line.size() - 2));
          continue;
        }
        if (!balanced(line)) {
          pending = line;
          pending_line = line_no;
          continue;
        }
        pending_line = line_no;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw cfg.error(pending_line, "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw cfg.error(pending_line, "empty key");
      std::size_t pos = 0;
      const std::string rest = trim(line.substr(eq + 1));
      ConfigValue v = cfg.parse_value(rest, pos, pending_line);
      if (trim(rest.substr(pos)).size() != 0) throw cfg.error(pending_line, "trailing characters after value");
      const std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values_.count(full)) throw cfg.error(pending_line, "duplicate key '" + full + "'");
      cfg.values_[full] = std::move(v);
    }
    if (!pending.empty()) throw cfg.error(pending_line, "unterminated array");
    return cfg;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, ConfigValue>& values() const { return values_; }

  const ConfigValue& get(const std::string& key) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
    return it->second;
  }

  std::string get_string(const std::string& key) const { return as_string(get(key), key); }
  double get_double(const std::string& key) const { return as_double(get(key), key); }
  long long get_int(const std::string& key) const { return as_int(get(key), key); }
  std::uint64_t get_u64(const std::string& key) const {
    const auto& v = get(key);
    if (v.kind != ConfigValue::Kind::number || v.text.find_first_not_of("0123456789") != std::string::npos) {
      throw type_error(v, key, "a non-negative integer");
    }
    try {
      return std::stoull(v.text);
    } catch (const std::out_of_range&) {
      throw type_error(v, key, "a 64-bit unsigned integer");
    }
  }
  bool get_bool(const std::string& key) const {
    const auto& v = get(key);
    if (v.kind != ConfigValue::Kind::boolean) throw type_error(v, key, "a boolean");
    return v.text == "true";
  }

  std::vector<std::string> get_strings(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& item : array(key)) out.push_back(as_string(item, key));
    return out;
  }
  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : array(key)) out.push_back(as_double(item, key));
    return out;
  }
  std::vector<std::vector<long long>> get_int_rows(const std::string& key) const {
    std::vector<std::vector<long long>> out;
    for (const auto& row : array(key)) {
      if (row.kind != ConfigValue::Kind::array) throw type_error(row, key, "an array of arrays");
      std::vector<long long> r;
      for (const auto& item : row.items) r.push_back(as_int(item, key));
      out.push_back(std::move(r));
    }
    return out;
  }

  /// Keys present in the file that no getter asked for.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(k);
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static bool balanced(const std::string& s) {
    int depth = 0;
    bool quoted = false;
    for (char c : s) {
      if (c == '"') quoted = !quoted;
      if (quoted) continue;
      if (c == '[') ++depth;
      if (c == ']') --depth;
    }
    return depth <= 0;
  }

  ConfigError error(int line, const std::string& msg) const {
    return ConfigError(origin_ + ":" + std::to_string(line) + ": " + msg);
  }

  ConfigError type_error(const ConfigValue& v, const std::string& key, const char* expected) const {
    return error(v.line, "'" + key + "' must be " + expected);
  }

  const std::vector<ConfigValue>& array(const std::string& key) const {
    const auto& v = get(key);
    if (v.kind != ConfigValue::Kind::array) throw type_error(v, key, "an array");
    return v.items;
  }

  std::string as_string(const ConfigValue& v, const std::string& key) const {
    if (v.kind != ConfigValue::Kind::string) throw type_error(v, key, "a quoted string");
    return v.text;
  }

  double as_double(const ConfigValue& v, const std::string& key) const {
    if (v.kind != ConfigValue::Kind::number) throw type_error(v, key, "a number");
    return std::stod(v.text);
  }

  long long as_int(const ConfigValue& v, const std::string& key) const {
    if (v.kind != ConfigValue::Kind::number || v.text.find_first_of(".eE") != std::string::npos) {
      throw type_error(v, key, "an integer");
    }
    return std::stoll(v.text);
  }

  ConfigValue parse_value(const std::string& s, std::size_t& pos, int line) const {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos >= s.size()) throw error(line, "missing value");
    ConfigValue v;
    v.line = line;
    if (s[pos] == '"') {
      const auto end = s.find('"', pos + 1);
      if (end == std::string::npos) throw error(line, "unterminated string");
      v.kind = ConfigValue::Kind::string;
      v.text = s.substr(pos + 1, end - pos - 1);
      pos = end + 1;
      return v;
    }
    if (s[pos] == '[') {
      v.kind = ConfigValue::Kind::array;
      ++pos;
      for (;;) {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == ',')) ++pos;
        if (pos >= s.size()) throw error(line, "unterminated array");
        if (s[pos] == ']') {
          ++pos;
          return v;
        }
        v.items.push_back(parse_value(s, pos, line));
      }
    }
    std::size_t end = pos;
    while (end < s.size() && s[end] != ',' && s[end] != ']' && s[end] != ' ' && s[end] != '\t') ++end;
    v.text = s.substr(pos, end - pos);
    pos = end;
    if (v.text == "true" || v.text == "false") {
      v.kind = ConfigValue::Kind::boolean;
      return v;
    }
    char* stop = nullptr;
    std::strtod(v.text.c_str(), &stop);
    if (v.text.empty() || stop != v.text.c_str() + v.text.size()) {
      throw error(line, "cannot parse value '" + v.text + "' (strings must be quoted)");
    }
    v.kind = ConfigValue::Kind::number;
    return v;
  }

  std::string origin_;
  std::map<std::string, ConfigValue> values_;
  mutable std::set<std::string> used_;
};

/// One ablation experiment: patch geometry by feature count, side and padding.
struct GridEntry {
  int features = 16;
  int image_side = 16;
  int pad_rows = 0;
  int pad_cols = 0;
  int cond_rows = 15;
  int target_rows = 1;

  PatchSpec spec() const {
    return PatchSpec{image_side - pad_rows, features, image_side, cond_rows, target_rows};
  }
  static GridEntry from_spec(const PatchSpec& s) {
    return {s.feature_count, s.image_side, s.pad_rows(), s.pad_cols(), s.cond_rows, s.target_rows};
  }
  bool operator==(const GridEntry&) const = default;
};

inline std::vector<GridEntry> default_grid() {
  std::vector<GridEntry> g;
  for (const auto& s : ablation_specs()) g.push_back(GridEntry::from_spec(s));
  return g;
}

/// Everything a run needs; `seed` is the root from which training and
/// sampling seeds are derived.
struct RunConfig {
  ExperimentConfig experiment;
  std::uint64_t seed = 1;
  std::vector<GridEntry> grid = default_grid();
  int total_features = 25;  // reported in the ablation table
};

inline void apply_seed(RunConfig& rc, std::uint64_t seed) {
  rc.seed = seed;
  rc.experiment.training.seed = derive_seed(seed, 1);
  rc.experiment.forecast.seed = derive_seed(seed, 2);
}

inline RunConfig run_config_from(const ConfigFile& f) {
  RunConfig rc;
  ExperimentConfig& e = rc.experiment;
  auto opt_string = [&](const char* k, std::string& dst) { if (f.has(k)) dst = f.get_string(k); };
  auto opt_int = [&](const char* k, int& dst) { if (f.has(k)) dst = static_cast<int>(f.get_int(k)); };
  auto opt_double = [&](const char* k, double& dst) { if (f.has(k)) dst = f.get_double(k); };

  opt_string("data.csv", e.data.csv_path);
  opt_string("data.timestamp_column", e.data.csv.timestamp_column);
  opt_string("data.power_column", e.data.csv.power_column);
  opt_string("data.radiation_column", e.data.csv.radiation_column);
  if (f.has("data.ignore_columns")) e.data.csv.ignore_columns = f.get_strings("data.ignore_columns");
  if (f.has("data.feature_columns")) e.data.feature_columns = f.get_strings("data.feature_columns");
  if (f.has("data.forward_fill")) e.data.csv.forward_fill = f.get_bool("data.forward_fill");
  if (f.has("data.split_fractions")) {
    const auto v = f.get_doubles("data.split_fractions");
    if (v.size() != 3) throw ConfigError("data.split_fractions must have three entries");
    e.data.split_fractions = {v[0], v[1], v[2]};
  }
  opt_double("data.daylight_threshold", e.data.daylight_threshold);
  if (f.has("synthetic.rows") || f.has("synthetic.features") || f.has("synthetic.seed") || f.has("synthetic.noise") ||
      f.has("synthetic.noise_persistence") || f.has("synthetic.start")) {
    SyntheticOptions so;
    if (f.has("synthetic.rows")) so.rows = static_cast<std::size_t>(f.get_int("synthetic.rows"));
    if (f.has("synthetic.features")) so.features = static_cast<std::size_t>(f.get_int("synthetic.features"));
    if (f.has("synthetic.seed")) so.seed = f.get_u64("synthetic.seed");
    if (f.has("synthetic.noise")) so.noise = f.get_double("synthetic.noise");
    if (f.has("synthetic.noise_persistence")) so.noise_persistence = f.get_double("synthetic.noise_persistence");
    if (f.has("synthetic.start")) {
      auto d = parse_day(f.get_string("synthetic.start"));
      if (!d) throw ConfigError("synthetic.start: expected a date YYYY-MM-DD");
      so.start_day = *d;
    }
    if (!e.data.csv_path.empty()) throw ConfigError("give either data.csv or a [synthetic] section, not both");
    e.data.synthetic = so;
  }

  opt_int("patch.window_rows", e.patch.window_rows);
  opt_int("patch.feature_count", e.patch.feature_count);
  opt_int("patch.image_side", e.patch.image_side);
  opt_int("patch.cond_rows", e.patch.cond_rows);
  opt_int("patch.target_rows", e.patch.target_rows);

  opt_int("schedule.steps", e.schedule.steps);
  opt_double("schedule.beta_start", e.schedule.beta_start);
  opt_double("schedule.beta_end", e.schedule.beta_end);

  e.model.image_side = e.patch.image_side;
  opt_int("model.base_channels", e.model.base_channels);
  opt_int("model.depth", e.model.depth);
  opt_int("model.time_embed_dim", e.model.time_embed_dim);
  opt_int("model.norm_groups", e.model.norm_groups);

  opt_int("training.epochs", e.training.epochs);
  opt_int("training.batch_size", e.training.batch_size);
  opt_double("training.learning_rate", e.training.learning_rate);
  opt_double("training.grad_clip", e.training.grad_clip);
  opt_int("training.validation_every", e.training.validation_every);
  if (f.has("training.cosine_decay")) e.training.cosine_decay = f.get_bool("training.cosine_decay");
  if (f.has("training.validation_cap")) e.training.validation_cap = static_cast<std::size_t>(f.get_int("training.validation_cap"));

  opt_int("forecast.num_samples", e.forecast.num_samples);
  opt_int("forecast.max_days", e.forecast.max_days);
  opt_int("forecast.batch", e.forecast.batch);
  for (auto [key, dst] : {std::pair{"forecast.from", &e.forecast.from_day}, std::pair{"forecast.to", &e.forecast.to_day}}) {
    if (!f.has(key)) continue;
    auto d = parse_day(f.get_string(key));
    if (!d) throw ConfigError(std::string(key) + ": expected a date YYYY-MM-DD");
    *dst = *d;
  }

  opt_string("run.out_dir", e.out_dir);
  std::uint64_t seed = 1;
  if (f.has("run.seed")) seed = f.get_u64("run.seed");
  apply_seed(rc, seed);

  if (f.has("ablate.grid")) {
    rc.grid.clear();
    for (const auto& row : f.get_int_rows("ablate.grid")) {
      if (row.size() != 6) {
        throw ConfigError("ablate.grid rows are [features, image_side, pad_rows, pad_cols, cond_rows, target_rows]");
      }
      GridEntry g{static_cast<int>(row[0]), static_cast<int>(row[1]), static_cast<int>(row[2]),
                  static_cast<int>(row[3]), static_cast<int>(row[4]), static_cast<int>(row[5])};
      if (g.pad_cols != g.image_side - g.features) {
        throw ConfigError("ablate.grid: pad_cols must equal image_side - features");
      }
      rc.grid.push_back(g);
    }
  }
  opt_int("ablate.total_features", rc.total_features);

  const auto unused = f.unused_keys();
  if (!unused.empty()) {
    std::string list;
    for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + list);
  }
  rc.experiment.validate();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) { return run_config_from(ConfigFile::load(path)); }

namespace detail {
inline std::string quote(const std::string& s) { return "\"" + s + "\""; }
// Shortest %g form that reads back to the same double.
inline std::string num(double v) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}
inline std::string strings(const std::vector<std::string>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + quote(v[i]);
  return out + "]";
}
}  // namespace detail

/// Fully resolved config; parsing it back yields the same RunConfig.
inline std::string to_toml(const RunConfig& rc) {
  using detail::num;
  using detail::quote;
  const ExperimentConfig& e = rc.experiment;
  std::ostringstream o;
  o << "[run]\n"
    << "out_dir = " << quote(e.out_dir) << "\n"
    << "seed = " << rc.seed << "\n\n";
  o << "[data]\n"
    << "csv = " << quote(e.data.csv_path) << "\n"
    << "timestamp_column = " << quote(e.data.csv.timestamp_column) << "\n"
    << "power_column = " << quote(e.data.csv.power_column) << "\n"
    << "radiation_column = " << quote(e.data.csv.radiation_column) << "\n"
    << "ignore_columns = " << detail::strings(e.data.csv.ignore_columns) << "\n"
    << "feature_columns = " << detail::strings(e.data.feature_columns) << "\n"
    << "forward_fill = " << (e.data.csv.forward_fill ? "true" : "false") << "\n"
    << "split_fractions = [" << num(e.data.split_fractions[0]) << ", " << num(e.data.split_fractions[1]) << ", "
    << num(e.data.split_fractions[2]) << "]\n"
    << "daylight_threshold = " << num(e.data.daylight_threshold) << "\n\n";
  if (e.data.synthetic) {
    const auto& so = *e.data.synthetic;
    o << "[synthetic]\n"
      << "rows = " << so.rows << "\n"
      << "features = " << so.features << "\n"
      << "noise = " << num(so.noise) << "\n"
      << "noise_persistence = " << num(so.noise_persistence) << "\n"
      << "seed = " << so.seed << "\n"
      << "start = " << quote(format_day(so.start_day)) << "\n\n";
  }
  o << "[patch]\n"
    << "window_rows = " << e.patch.window_rows << "\n"
    << "feature_count = " << e.patch.feature_count << "\n"
    << "image_side = " << e.patch.image_side << "\n"
    << "cond_rows = " << e.patch.cond_rows << "\n"
    << "target_rows = " << e.patch.target_rows << "\n\n";
  o << "[schedule]\n"
    << "steps = " << e.schedule.steps << "\n"
    << "beta_start = " << num(e.schedule.beta_start) << "\n"
    << "beta_end = " << num(e.schedule.beta_end) << "\n\n";
  o << "[model]\n"
    << "base_channels = " << e.model.base_channels << "\n"
    << "depth = " << e.model.depth << "\n"
    << "time_embed_dim = " << e.model.time_embed_dim << "\n"
    << "norm_groups = " << e.model.norm_groups << "\n\n";
  o << "[training]\n"
    << "epochs = " << e.training.epochs << "\n"
    << "batch_size = " << e.training.batch_size << "\n"
    << "learning_rate = " << num(e.training.learning_rate) << "\n"
    << "grad_clip = " << num(e.training.grad_clip) << "\n"
    << "validation_every = " << e.training.validation_every << "\n"
    << "validation_cap = " << e.training.validation_cap << "\n"
    << "cosine_decay = " << (e.training.cosine_decay ? "true" : "false") << "\n\n";
  o << "[forecast]\n"
    << "num_samples = " << e.forecast.num_samples << "\n"
    << "max_days = " << e.forecast.max_days << "\n"
    << "batch = " << e.forecast.batch << "\n";
  if (e.forecast.from_day) o << "from = " << quote(format_day(*e.forecast.from_day)) << "\n";
  if (e.forecast.to_day) o << "to = " << quote(format_day(*e.forecast.to_day)) << "\n";
  o << "\n[ablate]\n"
    << "total_features = " << rc.total_features << "\n"
    << "grid = [\n";
  for (const auto& g : rc.grid) {
    o << "  [" << g.features << ", " << g.image_side << ", " << g.pad_rows << ", " << g.pad_cols << ", " << g.cond_rows
      << ", " << g.target_rows << "],\n";
  }
  o << "]\n";
  return o.str();
}

}  // namespace pvdiff
