#pragma once

// On-disk formats. Embeddings are a little-endian binary32 matrix behind a
// 20-byte header; everything else is line-delimited JSON so it stays
// inspectable. All writers go through a temp file and an atomic rename.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "glode/core.hpp"
#include "glode/pipeline.hpp"
#include "glode/synthlab.hpp"

namespace glode::io {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr std::array<char, 4> kEmbeddingMagic = {'G', 'L', 'D', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 20;

inline constexpr const char* kLabelsFile = "labels.json";
inline constexpr const char* kEmbeddingsFile = "embeddings.glde";
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kGoldFile = "gold.jsonl";
inline constexpr const char* kGeneratorFile = "generator.json";

// ---------------------------------------------------------------------------
// Plumbing

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoError, "read failed for " + path.string());
  return std::move(ss).str();
}

/// Writes `bytes` to `path` through `path.tmp` + rename.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "rename to " + path.string() + " failed: " + ec.message());
}

/// printf-style "%.Ng" with a fixed significant-digit count.
inline std::string format_real(double x, int digits = 9) {
  if (std::isnan(x)) return "null";
  if (std::isinf(x)) return x > 0 ? "1e999" : "-1e999";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return value;
}

// Splits into lines, remembering each line's byte offset. A trailing newline
// does not start a new line.
struct Line {
  std::uint64_t offset;
  std::string_view text;
};

inline std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back({pos, text.substr(pos, end - pos)});
    pos = end + 1;
  }
  return lines;
}

inline json parse_json_at(std::string_view text, std::uint64_t base_offset) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(base_offset + (e.byte > 0 ? e.byte - 1 : 0), e.what());
  }
}

inline void require_keys(const json& obj, std::initializer_list<const char*> allowed, std::uint64_t offset,
                         bool all_required) {
  if (!obj.is_object()) throw FormatError(offset, "expected a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw FormatError(offset, "unknown key '" + key + "'");
  }
  if (all_required)
    for (const char* a : allowed)
      if (!obj.contains(a)) throw FormatError(offset, std::string("missing key '") + a + "'");
}

inline std::uint64_t as_id(const json& v, std::uint64_t offset, const char* what) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw FormatError(offset, std::string(what) + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embedding file

struct EmbeddingMatrix {
  std::uint64_t count = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;  // row-major

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

inline std::string encode_embeddings(std::span<const Record> records) {
  const std::size_t dim = records.empty() ? 0 : records.front().embedding.size();
  std::string out;
  out.reserve(kEmbeddingHeaderBytes + records.size() * dim * 4);
  out.append(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  detail::put_le<std::uint32_t>(out, kEmbeddingVersion);
  detail::put_le<std::uint64_t>(out, records.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  for (const Record& r : records) {
    if (r.embedding.size() != dim) throw Error(ErrorKind::DimensionMismatch, "ragged embeddings");
    for (double x : r.embedding)
      detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  return out;
}

inline EmbeddingMatrix decode_embeddings(std::string_view bytes) {
  if (bytes.size() < kEmbeddingHeaderBytes)
    throw FormatError(bytes.size(), "embedding file shorter than its 20-byte header");
  if (std::memcmp(bytes.data(), kEmbeddingMagic.data(), 4) != 0) throw FormatError(0, "bad magic, expected GLDE");
  const auto version = detail::get_le<std::uint32_t>(bytes, 4);
  if (version != kEmbeddingVersion)
    throw FormatError(4, "unsupported version " + std::to_string(version));
  EmbeddingMatrix m;
  m.count = detail::get_le<std::uint64_t>(bytes, 8);
  m.dim = detail::get_le<std::uint32_t>(bytes, 16);
  const std::uint64_t payload = bytes.size() - kEmbeddingHeaderBytes;
  if (m.dim != 0 && m.count > payload / 4 / m.dim)
    throw FormatError(bytes.size(), "payload truncated: header declares " + std::to_string(m.count) + " x " +
                                        std::to_string(m.dim));
  const std::uint64_t expected = m.count * m.dim * 4;
  if (payload < expected) throw FormatError(bytes.size(), "payload truncated");
  if (payload > expected) throw FormatError(kEmbeddingHeaderBytes + expected, "trailing bytes after payload");
  m.values.resize(m.count * m.dim);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    m.values[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, kEmbeddingHeaderBytes + 4 * i));
  return m;
}

// ---------------------------------------------------------------------------
// Label space

inline std::string encode_labels(const LabelSpace& labels) {
  ordered_json j;
  j["names"] = labels.names();
  j["o_index"] = labels.o_index();
  return j.dump() + "\n";
}

inline LabelSpace decode_labels(std::string_view text) {
  const json j = detail::parse_json_at(text, 0);
  detail::require_keys(j, {"names", "o_index"}, 0, true);
  if (!j["names"].is_array()) throw FormatError(0, "names must be an array");
  std::vector<std::string> names;
  for (const auto& n : j["names"]) {
    if (!n.is_string()) throw FormatError(0, "class names must be strings");
    names.push_back(n.get<std::string>());
  }
  const auto o = detail::as_id(j["o_index"], 0, "o_index");
  try {
    return LabelSpace(std::move(names), o);
  } catch (const Error& e) {
    throw FormatError(0, e.what());
  }
}

// ---------------------------------------------------------------------------
// Records file

inline std::string encode_record(const Record& r) {
  ordered_json j;
  j["id"] = r.id;
  j["split"] = std::string(to_string(r.split));
  j["gold"] = r.gold ? ordered_json(*r.gold) : ordered_json(nullptr);
  j["pseudo"] = r.pseudo ? ordered_json(*r.pseudo) : ordered_json(nullptr);
  return j.dump();
}

inline std::string encode_records(std::span<const Record> records) {
  std::string out;
  for (const Record& r : records) {
    out += encode_record(r);
    out += '\n';
  }
  return out;
}

/// Strict parse: exactly the keys id/split/gold/pseudo, ids strictly
/// ascending, pseudo of length n_classes. Embeddings are left empty.
inline std::vector<Record> decode_records(std::string_view text, std::size_t n_classes) {
  std::vector<Record> records;
  for (const auto& line : detail::split_lines(text)) {
    if (line.text.empty()) throw FormatError(line.offset, "empty line");
    const json j = detail::parse_json_at(line.text, line.offset);
    detail::require_keys(j, {"id", "split", "gold", "pseudo"}, line.offset, true);

    Record r;
    r.id = detail::as_id(j["id"], line.offset, "id");
    if (!records.empty() && r.id <= records.back().id)
      throw FormatError(line.offset, "ids must be strictly ascending");
    if (!j["split"].is_string()) throw FormatError(line.offset, "split must be a string");
    const auto split = parse_split(j["split"].get<std::string>());
    if (!split) throw FormatError(line.offset, "unknown split '" + j["split"].get<std::string>() + "'");
    r.split = *split;
    if (!j["gold"].is_null()) {
      r.gold = detail::as_id(j["gold"], line.offset, "gold");
      if (*r.gold >= n_classes) throw FormatError(line.offset, "gold label out of range");
    }
    if (!j["pseudo"].is_null()) {
      if (!j["pseudo"].is_array()) throw FormatError(line.offset, "pseudo must be an array or null");
      SoftLabel p;
      for (const auto& v : j["pseudo"]) {
        if (!v.is_number()) throw FormatError(line.offset, "pseudo entries must be numbers");
        p.push_back(v.get<double>());
      }
      if (p.size() != n_classes) throw FormatError(line.offset, "pseudo length differs from the label space");
      for (double x : p)
        if (!(x >= 0.0) || !std::isfinite(x)) throw FormatError(line.offset, "pseudo entries must be >= 0");
      r.pseudo = std::move(p);
    }
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Gold sidecar: {"id":..,"gold":..} per line, ascending ids.

inline std::string encode_gold(std::span<const Record> records, std::span<const ClassIndex> gold) {
  if (records.size() != gold.size()) throw Error(ErrorKind::LengthMismatch, "gold/records length mismatch");
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    ordered_json j;
    j["id"] = records[i].id;
    j["gold"] = gold[i];
    out += j.dump();
    out += '\n';
  }
  return out;
}

struct GoldEntry {
  RecordId id;
  ClassIndex gold;
};

inline std::vector<GoldEntry> decode_gold(std::string_view text, std::size_t n_classes) {
  std::vector<GoldEntry> out;
  for (const auto& line : detail::split_lines(text)) {
    const json j = detail::parse_json_at(line.text, line.offset);
    detail::require_keys(j, {"id", "gold"}, line.offset, true);
    GoldEntry e{detail::as_id(j["id"], line.offset, "id"), detail::as_id(j["gold"], line.offset, "gold")};
    if (e.gold >= n_classes) throw FormatError(line.offset, "gold label out of range");
    if (!out.empty() && e.id <= out.back().id) throw FormatError(line.offset, "ids must be strictly ascending");
    out.push_back(e);
  }
  return out;
}

/// Aligns gold entries with records by id.
inline std::vector<ClassIndex> align_gold(std::span<const Record> records, std::span<const GoldEntry> gold) {
  if (records.size() != gold.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(records.size()) + " records vs " +
                                               std::to_string(gold.size()) + " gold entries");
  std::vector<ClassIndex> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id != gold[i].id)
      throw Error(ErrorKind::LengthMismatch, "record id " + std::to_string(records[i].id) +
                                                 " has no aligned gold entry");
    out[i] = gold[i].gold;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

inline SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  if (!j.is_object()) throw Error(ErrorKind::ConfigInvalid, "config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    const auto num = [&]() {
      if (!v.is_number()) throw Error(ErrorKind::ConfigInvalid, "'" + key + "' must be a number");
      return v.get<double>();
    };
    const auto count = [&]() -> std::uint64_t {
      if (!v.is_number_unsigned()) throw Error(ErrorKind::ConfigInvalid, "'" + key + "' must be a non-negative integer");
      return v.get<std::uint64_t>();
    };
    if (key == "n_classes") c.n_classes = count();
    else if (key == "dim") c.dim = count();
    else if (key == "o_fraction") c.o_fraction = num();
    else if (key == "n_source") c.n_source = count();
    else if (key == "n_target") c.n_target = count();
    else if (key == "n_target_test") c.n_target_test = count();
    else if (key == "cluster_sigma") c.cluster_sigma = num();
    else if (key == "center_sep") c.center_sep = num();
    else if (key == "shift_magnitude") c.shift_magnitude = num();
    else if (key == "flip_rate") c.flip_rate = num();
    else if (key == "drift_eta") c.drift_eta = num();
    else if (key == "seed") c.seed = count();
    else throw Error(ErrorKind::ConfigInvalid, "unknown config key '" + key + "'");
  }
  return c;
}

inline ordered_json synth_config_to_json(const SynthConfig& c) {
  ordered_json j;
  j["n_classes"] = c.n_classes;
  j["dim"] = c.dim;
  j["o_fraction"] = c.o_fraction;
  j["n_source"] = c.n_source;
  j["n_target"] = c.n_target;
  j["n_target_test"] = c.n_target_test;
  j["cluster_sigma"] = c.cluster_sigma;
  j["center_sep"] = c.center_sep;
  j["shift_magnitude"] = c.shift_magnitude;
  j["flip_rate"] = c.flip_rate;
  j["drift_eta"] = c.drift_eta;
  j["seed"] = c.seed;
  return j;
}

inline SynthConfig load_synth_config(const fs::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
  }
  return synth_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Metrics stream

inline std::string format_vector(std::span<const double> v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_real(v[i]);
  }
  return out + "]";
}

inline std::string encode_metrics_line(const EpochReport& e) {
  std::string out = "{\"epoch\":" + std::to_string(e.epoch);
  out += ",\"pseudo_f1\":" + format_real(e.pseudo_f1);
  out += ",\"probe_test_f1\":" + format_real(e.probe_test_f1);
  out += ",\"beta\":" + format_real(e.beta);
  out += ",\"thresholds_global\":" + format_vector(e.thresholds_global);
  out += ",\"thresholds_local\":" + format_vector(e.thresholds_local);
  out += ",\"direction_stats\":{\"skip\":" + std::to_string(e.direction_stats.skip) +
         ",\"single\":" + std::to_string(e.direction_stats.single) +
         ",\"multi\":" + std::to_string(e.direction_stats.multi) + "}}";
  return out;
}

inline std::string encode_metrics(std::span<const EpochReport> epochs) {
  std::string out;
  for (const auto& e : epochs) out += encode_metrics_line(e) + "\n";
  return out;
}

inline std::vector<EpochReport> decode_metrics(std::string_view text) {
  std::vector<EpochReport> out;
  for (const auto& line : detail::split_lines(text)) {
    const json j = detail::parse_json_at(line.text, line.offset);
    detail::require_keys(j,
                         {"epoch", "pseudo_f1", "probe_test_f1", "beta", "thresholds_global", "thresholds_local",
                          "direction_stats"},
                         line.offset, true);
    try {
      EpochReport e;
      e.epoch = j["epoch"].get<int>();
      if (!out.empty() && e.epoch <= out.back().epoch) throw FormatError(line.offset, "epochs must ascend");
      e.pseudo_f1 = j["pseudo_f1"].get<double>();
      e.probe_test_f1 = j["probe_test_f1"].get<double>();
      e.beta = j["beta"].get<double>();
      e.thresholds_global = j["thresholds_global"].get<Vector>();
      e.thresholds_local = j["thresholds_local"].get<Vector>();
      const json& s = j["direction_stats"];
      detail::require_keys(s, {"skip", "single", "multi"}, line.offset, true);
      e.direction_stats = {s["skip"].get<std::size_t>(), s["single"].get<std::size_t>(),
                           s["multi"].get<std::size_t>()};
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw FormatError(line.offset, ex.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation CSV

inline std::string encode_ablation_csv(const AblationTable& table) {
  std::string out = "strategy,final_pseudo_f1,final_test_f1,delta_vs_no_denoise\n";
  for (const auto& r : table.rows) {
    out += std::string(to_string(r.strategy)) + "," + format_real(r.final_pseudo_f1) + "," +
           format_real(r.final_test_f1) + "," + format_real(r.delta_vs_no_denoise) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset directories

struct LoadedDataset {
  Dataset dataset;
  std::optional<std::vector<ClassIndex>> gold;  // from gold.jsonl when present
  std::optional<SynthConfig> generator;         // from generator.json when present
};

inline std::string encode_generator(const SynthConfig& cfg, const GroundTruth& truth) {
  ordered_json j;
  j["config"] = synth_config_to_json(cfg);
  j["centroids"] = truth.centroids;
  j["shifts"] = truth.shifts;
  return j.dump() + "\n";
}

inline void write_dataset(const fs::path& dir, const SynthConfig& cfg, const SynthDataset& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const auto& records = data.dataset.records;
  write_file_atomic(dir / kLabelsFile, encode_labels(data.dataset.labels));
  write_file_atomic(dir / kEmbeddingsFile, encode_embeddings(records));
  write_file_atomic(dir / kRecordsFile, encode_records(records));
  write_file_atomic(dir / kGoldFile, encode_gold(records, data.truth.gold));
  write_file_atomic(dir / kGeneratorFile, encode_generator(cfg, data.truth));
}

/// Reads labels + records + embeddings (rows in ascending id order) and the
/// optional ground-truth sidecars.
inline LoadedDataset load_dataset(const fs::path& dir) {
  LabelSpace labels = decode_labels(read_file(dir / kLabelsFile));
  std::vector<Record> records = decode_records(read_file(dir / kRecordsFile), labels.size());
  const EmbeddingMatrix m = decode_embeddings(read_file(dir / kEmbeddingsFile));
  if (m.count != records.size())
    throw FormatError(8, "embedding count " + std::to_string(m.count) + " differs from " +
                             std::to_string(records.size()) + " records");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = m.row(i);
    records[i].embedding.assign(row.begin(), row.end());
    for (double x : records[i].embedding)
      if (!std::isfinite(x))
        throw FormatError(kEmbeddingHeaderBytes + i * m.dim * 4, "non-finite embedding value");
  }
  LoadedDataset out{Dataset{std::move(labels), std::move(records)}, std::nullopt, std::nullopt};
  if (fs::exists(dir / kGoldFile)) {
    const auto gold = decode_gold(read_file(dir / kGoldFile), out.dataset.labels.size());
    out.gold = align_gold(out.dataset.records, gold);
  }
  if (fs::exists(dir / kGeneratorFile)) {
    const json j = detail::parse_json_at(read_file(dir / kGeneratorFile), 0);
    if (!j.is_object() || !j.contains("config")) throw FormatError(0, "generator.json lacks a config");
    out.generator = synth_config_from_json(j["config"]);
  }
  return out;
}

}  // namespace glode::io
