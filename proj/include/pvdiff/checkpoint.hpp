#pragma once

// On-disk artifacts: model checkpoints (named float32 tensors plus JSON
// metadata) and the prepared patch cache. Binary payloads are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvdiff/data.hpp"
#include "pvdiff/denoiser.hpp"
#include "pvdiff/error.hpp"
#include "pvdiff/patching.hpp"
#include "pvdiff/pipeline.hpp"

namespace pvdiff {

using json = nlohmann::json;

namespace io {

inline void put_u32(std::ostream& o, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  o.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& o, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  o.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f32(std::ostream& o, const float* p, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    o.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < n; ++i) put_u32(o, std::bit_cast<std::uint32_t>(p[i]));
  }
}

inline void read_exact(std::istream& in, void* dst, std::size_t n, const std::string& what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw DataError(what + ": truncated file");
}

inline std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  read_exact(in, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  read_exact(in, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void get_f32(std::istream& in, float* p, std::size_t n, const std::string& what) {
  read_exact(in, p, n * sizeof(float), what);
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u;
      std::memcpy(&u, p + i, 4);
      u = ((u & 0xffu) << 24) | ((u & 0xff00u) << 8) | ((u >> 8) & 0xff00u) | (u >> 24);
      std::memcpy(p + i, &u, 4);
    }
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw DataError("cannot write '" + path + "'");
  return o;
}

inline std::ifstream open_in(const std::string& path, const std::string& hint = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'" + (hint.empty() ? "" : "; " + hint));
  return in;
}

inline json read_json(const std::string& path, const std::string& hint = {}) {
  auto in = open_in(path, hint);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) {
  auto o = open_out(path);
  o << j.dump(2) << '\n';
}

}  // namespace io

// ---- JSON views of the config pieces stored alongside artifacts ----

inline json to_json(const PatchSpec& s) {
  return {{"window_rows", s.window_rows}, {"feature_count", s.feature_count}, {"image_side", s.image_side},
          {"cond_rows", s.cond_rows},     {"target_rows", s.target_rows}};
}

inline PatchSpec patch_spec_from(const json& j) {
  PatchSpec s{j.at("window_rows").get<int>(), j.at("feature_count").get<int>(), j.at("image_side").get<int>(),
              j.at("cond_rows").get<int>(), j.at("target_rows").get<int>()};
  s.validate();
  return s;
}

inline json to_json(const DenoiserConfig& c) {
  return {{"image_side", c.image_side},         {"in_channels", c.in_channels}, {"base_channels", c.base_channels},
          {"depth", c.depth},                   {"time_embed_dim", c.time_embed_dim},
          {"norm_groups", c.norm_groups}};
}

inline DenoiserConfig denoiser_config_from(const json& j) {
  DenoiserConfig c;
  c.image_side = j.at("image_side").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.depth = j.at("depth").get<int>();
  c.time_embed_dim = j.at("time_embed_dim").get<int>();
  c.norm_groups = j.at("norm_groups").get<int>();
  c.validate();
  return c;
}

inline json to_json(const Normalizer& n, const std::vector<std::string>& names) {
  return {{"features", names}, {"min", n.mins()}, {"max", n.maxs()}};
}

inline Normalizer normalizer_from(const json& j) {
  return Normalizer(j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>());
}

// ---- model checkpoint ----

/// Trained parameters plus what is needed to rebuild the network and decode its output.
struct Checkpoint {
  DenoiserParams params;
  DenoiserConfig model;
  PatchSpec patch;
  ScheduleConfig schedule;
  Normalizer normalizer;
  std::vector<std::string> feature_names;  // all series columns, normalizer order
  std::vector<std::size_t> columns;        // selected columns, patch order
  std::size_t steps = 0;
};

inline constexpr char kModelMagic[8] = {'P', 'V', 'M', 'O', 'D', 'E', 'L', '1'};
inline constexpr char kPatchMagic[8] = {'P', 'V', 'P', 'A', 'T', 'C', 'H', '1'};

inline void write_tensors(const std::string& path, const DenoiserParams& params) {
  auto o = io::open_out(path);
  o.write(kModelMagic, 8);
  io::put_u32(o, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i];
    io::put_u32(o, static_cast<std::uint32_t>(t.name.size()));
    o.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    io::put_u32(o, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) io::put_u32(o, static_cast<std::uint32_t>(d));
    io::put_f32(o, t.data.data(), t.data.size());
  }
  if (!o) throw DataError("failed writing '" + path + "'");
}

inline DenoiserParams read_tensors(const std::string& path) {
  auto in = io::open_in(path);
  char magic[8];
  io::read_exact(in, magic, 8, path);
  if (std::memcmp(magic, kModelMagic, 8) != 0) throw DataError(path + ": not a model checkpoint");
  DenoiserParams params;
  const std::uint32_t count = io::get_u32(in, path);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name(io::get_u32(in, path), '\0');
    io::read_exact(in, name.data(), name.size(), path);
    std::vector<int> shape(io::get_u32(in, path));
    for (int& d : shape) d = static_cast<int>(io::get_u32(in, path));
    const std::size_t i = params.add(name, shape);
    io::get_f32(in, params.data(i), params[i].data.size(), path);
  }
  return params;
}

/// Writes `<dir>/model.bin` and `<dir>/model.json`.
inline void save_checkpoint(const std::string& dir, const Checkpoint& c) {
  write_tensors(dir + "/model.bin", c.params);
  json meta = {{"model", to_json(c.model)},
               {"patch", to_json(c.patch)},
               {"schedule", {{"steps", c.schedule.steps}, {"beta_start", c.schedule.beta_start},
                             {"beta_end", c.schedule.beta_end}}},
               {"normalizer", to_json(c.normalizer, c.feature_names)},
               {"columns", c.columns},
               {"steps", c.steps},
               {"tensors", "model.bin"}};
  io::write_json(dir + "/model.json", meta);
}

/// Accepts either the checkpoint directory or the path of its model.json.
inline Checkpoint load_checkpoint(std::string path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") path = path.substr(0, path.find_last_of('/'));
  if (path.empty()) path = ".";
  const json meta = io::read_json(path + "/model.json", "run `pvdiff train` first");
  Checkpoint c;
  try {
    c.model = denoiser_config_from(meta.at("model"));
    c.patch = patch_spec_from(meta.at("patch"));
    const auto& s = meta.at("schedule");
    c.schedule = {s.at("steps").get<int>(), s.at("beta_start").get<double>(), s.at("beta_end").get<double>()};
    c.normalizer = normalizer_from(meta.at("normalizer"));
    c.feature_names = meta.at("normalizer").at("features").get<std::vector<std::string>>();
    c.columns = meta.at("columns").get<std::vector<std::size_t>>();
    c.steps = meta.at("steps").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(path + "/model.json: " + e.what());
  }
  c.params = read_tensors(path + "/model.bin");
  try {
    UNet<float>(c.model).check_layout(c.params);
  } catch (const ConfigError& e) {
    throw DataError(path + ": " + e.what());
  }
  return c;
}

// ---- patch cache ----

/// Every stride-1 window of the normalized selected columns, with the split it was cut from.
struct PatchCache {
  PatchSpec spec;
  std::vector<std::size_t> columns;
  std::vector<std::string> column_names;
  SplitRanges split;
  HourStamp first_timestamp = 0;
  std::size_t series_rows = 0;
  std::vector<Patch> patches;  // origin = series row of the first patch row

  /// Patches that lie entirely inside `range`.
  std::vector<Patch> within(IndexRange range) const {
    std::vector<Patch> out;
    for (const auto& p : patches) {
      if (p.origin >= range.begin && p.origin + static_cast<std::size_t>(spec.window_rows) <= range.end) {
        out.push_back(p);
      }
    }
    return out;
  }
};

inline PatchCache make_patch_cache(const PreparedData& p, const PatchSpec& spec) {
  PatchCache c;
  c.spec = spec;
  c.columns = p.columns;
  for (auto col : p.columns) c.column_names.push_back(p.series.feature_names[col]);
  c.split = p.split;
  c.first_timestamp = p.series.timestamps.front();
  c.series_rows = p.series.rows();
  c.patches = patches_in(p, IndexRange{0, p.series.rows()}, spec);
  return c;
}

inline json range_json(IndexRange r) { return json::array({r.begin, r.end}); }
inline IndexRange range_from(const json& j) { return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()}; }

inline void save_patch_cache(const std::string& path, const PatchCache& c) {
  const json header = {{"count", c.patches.size()},
                       {"shape", {c.spec.window_rows, c.spec.feature_count}},
                       {"dtype", "float32-le"},
                       {"spec", to_json(c.spec)},
                       {"columns", c.columns},
                       {"column_names", c.column_names},
                       {"split", {{"train", range_json(c.split.train)},
                                  {"validation", range_json(c.split.validation)},
                                  {"test", range_json(c.split.test)}}},
                       {"series_rows", c.series_rows},
                       {"first_timestamp", format_timestamp(c.first_timestamp)}};
  const std::string text = header.dump();
  auto o = io::open_out(path);
  o.write(kPatchMagic, 8);
  io::put_u64(o, text.size());
  o.write(text.data(), static_cast<std::streamsize>(text.size()));
  // Patches are consecutive windows, so origins follow from the index.
  for (const auto& p : c.patches) io::put_f32(o, p.values.data.data(), p.values.data.size());
  if (!o) throw DataError("failed writing '" + path + "'");
}

inline PatchCache load_patch_cache(const std::string& path) {
  auto in = io::open_in(path, "run `pvdiff prepare` first");
  char magic[8];
  io::read_exact(in, magic, 8, path);
  if (std::memcmp(magic, kPatchMagic, 8) != 0) throw DataError(path + ": not a patch cache");
  std::string text(io::get_u64(in, path), '\0');
  io::read_exact(in, text.data(), text.size(), path);
  PatchCache c;
  std::size_t count = 0;
  try {
    const json h = json::parse(text);
    c.spec = patch_spec_from(h.at("spec"));
    c.columns = h.at("columns").get<std::vector<std::size_t>>();
    c.column_names = h.at("column_names").get<std::vector<std::string>>();
    c.split = {range_from(h.at("split").at("train")), range_from(h.at("split").at("validation")),
               range_from(h.at("split").at("test"))};
    c.series_rows = h.at("series_rows").get<std::size_t>();
    const auto ts = parse_timestamp(h.at("first_timestamp").get<std::string>());
    if (!ts) throw DataError(path + ": bad first_timestamp");
    c.first_timestamp = *ts;
    count = h.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(path + ": bad header: " + e.what());
  }
  const auto rows = static_cast<std::size_t>(c.spec.window_rows);
  const auto cols = static_cast<std::size_t>(c.spec.feature_count);
  c.patches.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Patch p{Grid<float>(rows, cols), i};
    io::get_f32(in, p.values.data.data(), p.values.data.size(), path);
    c.patches.push_back(std::move(p));
  }
  return c;
}

}  // namespace pvdiff
