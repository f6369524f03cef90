#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "confadapt/core.hpp"
#include "confadapt/features.hpp"
#include "confadapt/forest.hpp"
#include "confadapt/labeler.hpp"

namespace confadapt::io {

// ============================================================================
// Errors
// ============================================================================

struct IoError : Error {
  using Error::Error;
};

struct ParseError : Error {
  std::size_t line;
  std::string field;

  ParseError(std::size_t line_no, std::string field_name, const std::string& message)
      : Error("line " + std::to_string(line_no) + (field_name.empty() ? "" : ", field '" + field_name + "'") + ": " +
              message),
        line(line_no),
        field(std::move(field_name)) {}
};

struct ValidationError : Error {
  std::vector<std::string> violations;

  explicit ValidationError(std::vector<std::string> v)
      : Error(v.empty() ? "validation failed" : v.front() + (v.size() > 1 ? " (and " + std::to_string(v.size() - 1) + " more)" : "")),
        violations(std::move(v)) {}
};

struct VersionMismatch : Error {
  using Error::Error;
};

struct CorruptFile : Error {
  using Error::Error;
};

// ============================================================================
// Text helpers
// ============================================================================

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

/// Lines without their LF terminator; a final unterminated line is kept.
inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string::npos) pos = text.size();
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

/// Comma-separated table with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const {
    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    return out;
  }

  void write(const std::filesystem::path& path) const { write_file(path, to_string()); }

  static Table parse(const std::string& text, std::string_view what) {
    Table t;
    const auto lines = lines_of(text);
    if (lines.empty()) throw ParseError(1, "", std::string(what) + " file has no header row");
    t.header = split(lines[0], ',');
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto cells = split(lines[i], ',');
      if (cells.size() != t.header.size())
        throw ParseError(i + 1, "", "expected " + std::to_string(t.header.size()) + " columns, found " +
                                        std::to_string(cells.size()));
      t.rows.push_back(std::move(cells));
    }
    return t;
  }
};

// ============================================================================
// Dataset records
// ============================================================================

enum class ReadMode { Strict, Lenient };

namespace detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr std::array<std::pair<Phase, std::string_view>, 4> kPhaseKeys{{
    {Phase::Pre, "pre"},
    {Phase::Failure, "failure"},
    {Phase::Explanation, "explanation"},
    {Phase::Resolution, "resolution"},
}};

inline constexpr std::array<std::string_view, 7> kEpisodeFields{
    "participant_id", "round", "object_index", "action", "delivered_level", "strategy_id", "phases"};
inline constexpr std::array<std::string_view, 4> kPhaseFields{"avg_emotions", "max_emotions", "gaze", "gestures"};

template <std::size_t N>
bool known(std::string_view key, const std::array<std::string_view, N>& fields) {
  for (auto f : fields)
    if (f == key) return true;
  return false;
}

struct RecordReader {
  std::size_t line;
  ReadMode mode;

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const { throw ParseError(line, field, msg); }

  template <std::size_t N>
  void check_fields(const json& obj, const std::array<std::string_view, N>& allowed, const std::string& where) const {
    if (mode != ReadMode::Strict) return;
    for (const auto& [key, _] : obj.items())
      if (!known(key, allowed)) fail(where.empty() ? key : where + "." + key, "unknown field");
  }

  const json& member(const json& obj, const std::string& key, const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, "missing");
    return *it;
  }

  std::string str(const json& obj, const std::string& key) const {
    const auto& v = member(obj, key, key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  int integer(const json& obj, const std::string& key) const {
    const auto& v = member(obj, key, key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  template <std::size_t N>
  std::array<double, N> numbers(const json& v, const std::string& path) const {
    if (!v.is_array() || v.size() != N) fail(path, "expected an array of " + std::to_string(N) + " numbers");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) fail(path, "element " + std::to_string(i) + " is not a number");
      out[i] = v[i].get<double>();
    }
    return out;
  }

  PhaseObservation phase(const json& v, Phase p, const std::string& path) const {
    if (!v.is_object()) fail(path, "expected an object");
    check_fields(v, kPhaseFields, path);
    PhaseObservation obs;
    obs.phase = p;
    obs.avg_emotions.values = numbers<kEmotionCount>(member(v, "avg_emotions", path + ".avg_emotions"), path + ".avg_emotions");
    obs.max_emotions.values = numbers<kEmotionCount>(member(v, "max_emotions", path + ".max_emotions"), path + ".max_emotions");
    const auto gaze = numbers<3>(member(v, "gaze", path + ".gaze"), path + ".gaze");
    obs.gaze = {gaze[0], gaze[1], gaze[2]};
    const auto& g = member(v, "gestures", path + ".gestures");
    if (!g.is_array() || g.size() != 2) fail(path + ".gestures", "expected an array of two 0/1 integers");
    std::array<bool, 2> flags{};
    for (std::size_t i = 0; i < 2; ++i) {
      if (!g[i].is_number_integer() || (g[i].get<int>() != 0 && g[i].get<int>() != 1))
        fail(path + ".gestures", "element " + std::to_string(i) + " is not 0 or 1");
      flags[i] = g[i].get<int>() == 1;
    }
    obs.gestures = {flags[0], flags[1]};
    return obs;
  }

  FailureEpisode episode(const std::string& text) const {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail("", std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) fail("", "record is not an object");
    check_fields(j, kEpisodeFields, "");

    FailureEpisode ep;
    ep.participant_id = str(j, "participant_id");
    ep.round = integer(j, "round");
    ep.object_index = integer(j, "object_index");
    const auto action = str(j, "action");
    if (auto a = parse_action(action)) ep.action = *a;
    else fail("action", "unknown action '" + action + "'");
    const auto level = str(j, "delivered_level");
    if (auto l = parse_level(level)) ep.delivered_level = *l;
    else fail("delivered_level", "unknown level '" + level + "'");

    if (auto it = j.find("strategy_id"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) fail("strategy_id", "expected a string or null");
      const auto s = it->get<std::string>();
      if (auto st = parse_strategy(s)) ep.strategy_id = *st;
      else fail("strategy_id", "unknown strategy '" + s + "'");
    }

    const auto& phases = member(j, "phases", "phases");
    if (!phases.is_object()) fail("phases", "expected an object");
    if (mode == ReadMode::Strict) {
      for (const auto& [key, _] : phases.items()) {
        bool ok = false;
        for (const auto& [p, name] : kPhaseKeys) ok = ok || key == name;
        if (!ok) fail("phases." + key, "unknown field");
      }
    }
    for (const auto& [p, name] : kPhaseKeys) {
      auto it = phases.find(std::string(name));
      if (it == phases.end()) continue;  // reported by validation
      ep.observations[p] = phase(*it, p, "phases." + std::string(name));
    }
    return ep;
  }
};

inline ordered_json emotions_json(const EmotionVector& ev) {
  ordered_json a = ordered_json::array();
  for (double v : ev.values) a.push_back(v);
  return a;
}

}  // namespace detail

inline FailureEpisode parse_episode(const std::string& line, std::size_t line_no = 1,
                                    ReadMode mode = ReadMode::Strict) {
  return detail::RecordReader{line_no, mode}.episode(line);
}

/// One record, no trailing newline. Fields appear in schema order.
inline std::string encode_episode(const FailureEpisode& ep) {
  detail::ordered_json j;
  j["participant_id"] = ep.participant_id;
  j["round"] = ep.round;
  j["object_index"] = ep.object_index;
  j["action"] = std::string(to_string(ep.action));
  j["delivered_level"] = std::string(to_string(ep.delivered_level));
  j["strategy_id"] = ep.strategy_id ? detail::ordered_json(std::string(to_string(*ep.strategy_id))) : detail::ordered_json();
  detail::ordered_json phases = detail::ordered_json::object();
  for (const auto& [p, name] : detail::kPhaseKeys) {
    auto it = ep.observations.find(p);
    if (it == ep.observations.end()) continue;
    const auto& o = it->second;
    detail::ordered_json ph;
    ph["avg_emotions"] = detail::emotions_json(o.avg_emotions);
    ph["max_emotions"] = detail::emotions_json(o.max_emotions);
    ph["gaze"] = {o.gaze.robot, o.gaze.task, o.gaze.misc};
    ph["gestures"] = {o.gestures.hands_on_head_face ? 1 : 0, o.gestures.head_tilt ? 1 : 0};
    phases[std::string(name)] = std::move(ph);
  }
  j["phases"] = std::move(phases);
  return j.dump();
}

inline std::string encode_dataset(const Dataset& d) {
  std::string out;
  for (const auto& ep : d.episodes) {
    out += encode_episode(ep);
    out += '\n';
  }
  return out;
}

/// Strict mode rejects unknown fields and throws ValidationError listing every
/// violation. Lenient mode ignores unknown fields and drops invalid episodes,
/// describing each drop in `warnings`.
inline Dataset decode_dataset(const std::string& text, ReadMode mode = ReadMode::Strict,
                              std::vector<std::string>* warnings = nullptr) {
  Dataset d;
  std::vector<std::size_t> line_of;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    d.episodes.push_back(parse_episode(std::string(line), i + 1, mode));
    line_of.push_back(i + 1);
  }

  std::vector<std::string> violations;
  std::vector<bool> bad(d.episodes.size(), false);
  std::map<EpisodeKey, std::size_t> seen;
  for (std::size_t i = 0; i < d.episodes.size(); ++i) {
    const std::string where = "line " + std::to_string(line_of[i]) + ": ";
    for (const auto& v : validate_episode(d.episodes[i])) {
      violations.push_back(where + v);
      bad[i] = true;
    }
    auto [it, inserted] = seen.emplace(d.episodes[i].key(), line_of[i]);
    if (!inserted) {
      violations.push_back(where + "duplicate key " + to_string(d.episodes[i].key()) + " (first on line " +
                           std::to_string(it->second) + ")");
      bad[i] = true;
    }
  }
  if (violations.empty()) return d;
  if (mode == ReadMode::Strict) throw ValidationError(std::move(violations));

  if (warnings) warnings->insert(warnings->end(), violations.begin(), violations.end());
  Dataset kept;
  for (std::size_t i = 0; i < d.episodes.size(); ++i)
    if (!bad[i]) kept.episodes.push_back(std::move(d.episodes[i]));
  return kept;
}

inline Dataset read_dataset(const std::filesystem::path& path, ReadMode mode = ReadMode::Strict,
                            std::vector<std::string>* warnings = nullptr) {
  return decode_dataset(read_file(path), mode, warnings);
}

inline void write_dataset(const Dataset& d, const std::filesystem::path& path) { write_file(path, encode_dataset(d)); }

// ============================================================================
// Labels
// ============================================================================

inline Table labels_table(const std::vector<labeler::KeyedLabel>& labels) {
  Table t{{"participant_id", "round", "object_index", "state", "rule"}, {}};
  for (const auto& l : labels)
    t.rows.push_back({l.key.participant_id, std::to_string(l.key.round), std::to_string(l.key.object_index),
                      std::string(to_string(l.label.state)), std::string(to_string(l.label.rule))});
  return t;
}

inline void write_labels(const std::vector<labeler::KeyedLabel>& labels, const std::filesystem::path& path) {
  labels_table(labels).write(path);
}

inline std::vector<labeler::KeyedLabel> decode_labels(const std::string& text) {
  const Table t = Table::parse(text, "labels");
  if (t.header != std::vector<std::string>{"participant_id", "round", "object_index", "state", "rule"})
    throw ParseError(1, "", "unexpected labels header");
  std::vector<labeler::KeyedLabel> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::size_t line = i + 2;
    labeler::KeyedLabel l;
    l.key.participant_id = r[0];
    auto round = parse_int<int>(r[1]);
    auto obj = parse_int<int>(r[2]);
    auto state = parse_state(r[3]);
    auto rule = parse_rule(r[4]);
    if (!round) throw ParseError(line, "round", "not an integer");
    if (!obj) throw ParseError(line, "object_index", "not an integer");
    if (!state) throw ParseError(line, "state", "unknown state '" + r[3] + "'");
    if (!rule) throw ParseError(line, "rule", "unknown rule '" + r[4] + "'");
    if ((*state == ConfusionState::NotConfused) != (*rule == ConfusionRule::None))
      throw ParseError(line, "rule", "state and rule disagree");
    l.key.round = *round;
    l.key.object_index = *obj;
    l.label = {*state, *rule};
    out.push_back(std::move(l));
  }
  return out;
}

inline std::vector<labeler::KeyedLabel> read_labels(const std::filesystem::path& path) {
  return decode_labels(read_file(path));
}

/// Labels reordered to follow the dataset's episode order.
inline std::vector<labeler::KeyedLabel> align_labels(const Dataset& d, const std::vector<labeler::KeyedLabel>& labels) {
  std::map<EpisodeKey, ConfusionLabel> by_key;
  for (const auto& l : labels) by_key[l.key] = l.label;
  std::vector<labeler::KeyedLabel> out;
  for (const auto& ep : d.episodes) {
    auto it = by_key.find(ep.key());
    if (it == by_key.end()) throw InvalidArgument("labels file has no entry for " + to_string(ep.key()));
    out.push_back({ep.key(), it->second});
  }
  return out;
}

// ============================================================================
// Feature matrices
// ============================================================================

inline Table features_table(const std::vector<features::TrainingRow>& rows) {
  Table t{{"participant_id", "round", "object_index", "class"}, {}};
  for (const auto& n : features::slot_names()) t.header.push_back(n);
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.key.participant_id, std::to_string(r.key.round),
                                   std::to_string(r.key.object_index), std::string(to_string(r.y))};
    for (double v : r.x.values) cells.push_back(format_double(v));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline void write_features(const std::vector<features::TrainingRow>& rows, const std::filesystem::path& path) {
  features_table(rows).write(path);
}

inline std::vector<features::TrainingRow> decode_features(const std::string& text) {
  const Table t = Table::parse(text, "features");
  if (t.header != features_table({}).header)
    throw VersionMismatch("feature matrix header does not match layout " + std::string(features::kLayoutVersion));
  std::vector<features::TrainingRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::size_t line = i + 2;
    features::TrainingRow row;
    row.key.participant_id = r[0];
    auto round = parse_int<int>(r[1]);
    auto obj = parse_int<int>(r[2]);
    auto cls = parse_state(r[3]);
    if (!round || !obj) throw ParseError(line, "round", "episode key is not numeric");
    if (!cls) throw ParseError(line, "class", "unknown class '" + r[3] + "'");
    row.key.round = *round;
    row.key.object_index = *obj;
    row.y = *cls;
    for (std::size_t s = 0; s < features::kSlotCount; ++s) {
      auto v = parse_double(r[4 + s]);
      if (!v) throw ParseError(line, t.header[4 + s], "not a number");
      row.x[s] = *v;
    }
    out.push_back(std::move(row));
  }
  return out;
}

inline std::vector<features::TrainingRow> read_features(const std::filesystem::path& path) {
  return decode_features(read_file(path));
}

// ============================================================================
// Models
// ============================================================================

inline constexpr std::string_view kModelMagic = "CONFADAPT-FOREST";
inline constexpr std::string_view kModelSchemaVersion = "1";

/// Line-oriented text: magic, versions, parameters, then every tree in
/// preorder. Doubles use shortest round-trip decimal, so a loaded model
/// predicts bit-identically.
inline std::string encode_model(const forest::Model& m) {
  const auto& p = m.params;
  std::string out;
  auto line = [&](std::initializer_list<std::string> parts) {
    bool first = true;
    for (const auto& s : parts) {
      if (!first) out += ' ';
      out += s;
      first = false;
    }
    out += '\n';
  };
  line({std::string(kModelMagic)});
  line({"schema_version", std::string(kModelSchemaVersion)});
  line({"feature_layout_version", m.feature_layout});
  line({"n_features", std::to_string(m.n_features)});
  line({"params", "n_trees", std::to_string(p.n_trees), "max_depth", std::to_string(p.max_depth), "min_samples_split",
        std::to_string(p.min_samples_split), "min_samples_leaf", std::to_string(p.min_samples_leaf),
        "features_per_split", std::to_string(p.features_per_split.value_or(0)), "class_weight_confused",
        format_double(p.class_weights.value_or(forest::ClassWeights{}).confused), "class_weight_not_confused",
        format_double(p.class_weights.value_or(forest::ClassWeights{}).not_confused), "bootstrap",
        p.bootstrap ? "1" : "0", "decision_threshold", format_double(p.decision_threshold), "seed",
        std::to_string(p.seed)});
  line({"training", "rows", std::to_string(m.n_training_rows), "confused", std::to_string(m.n_training_confused)});
  line({"trees", std::to_string(m.trees.size())});
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    line({"tree", std::to_string(t), std::to_string(m.trees[t].nodes.size())});
    for (const auto& n : m.trees[t].nodes) {
      if (n.is_leaf())
        line({"leaf", format_double(n.prob_confused), format_double(n.weight_confused),
              format_double(n.weight_not_confused), std::to_string(n.n_samples)});
      else
        line({"split", std::to_string(n.feature), format_double(n.threshold), std::to_string(n.left),
              std::to_string(n.right), format_double(n.prob_confused), format_double(n.weight_confused),
              format_double(n.weight_not_confused), std::to_string(n.n_samples)});
    }
  }
  line({"end"});
  return out;
}

namespace detail {

struct ModelReader {
  std::vector<std::string> lines;
  std::size_t pos = 0;

  [[noreturn]] void corrupt(const std::string& why) const {
    throw CorruptFile("model file corrupt at line " + std::to_string(pos + 1) + ": " + why);
  }

  std::vector<std::string> next() {
    if (pos >= lines.size()) corrupt("unexpected end of file");
    return split(lines[pos++], ' ');
  }

  std::vector<std::string> expect(std::string_view keyword, std::size_t n_fields) {
    auto f = next();
    --pos;
    if (f.empty() || f[0] != keyword) corrupt("expected '" + std::string(keyword) + "'");
    if (f.size() != n_fields) corrupt("'" + std::string(keyword) + "' has " + std::to_string(f.size()) + " fields");
    ++pos;
    return f;
  }

  template <typename T>
  T integer(const std::string& s) {
    auto v = parse_int<T>(s);
    if (!v) corrupt("bad integer '" + s + "'");
    return *v;
  }

  double number(const std::string& s) {
    auto v = parse_double(s);
    if (!v) corrupt("bad number '" + s + "'");
    return *v;
  }
};

}  // namespace detail

inline forest::Model decode_model(const std::string& text) {
  detail::ModelReader r{lines_of(text)};
  if (r.lines.empty() || r.lines[0] != kModelMagic) throw CorruptFile("not a model file (missing magic header)");
  r.pos = 1;

  forest::Model m;
  const auto schema = r.expect("schema_version", 2);
  if (schema[1] != kModelSchemaVersion)
    throw VersionMismatch("model schema version " + schema[1] + " is not supported (expected " +
                          std::string(kModelSchemaVersion) + ")");
  const auto layout = r.expect("feature_layout_version", 2);
  if (layout[1] != features::kLayoutVersion)
    throw VersionMismatch("model feature layout " + layout[1] + " is not supported (expected " +
                          std::string(features::kLayoutVersion) + ")");
  m.feature_layout = layout[1];
  m.n_features = r.integer<std::size_t>(r.expect("n_features", 2)[1]);

  const auto p = r.expect("params", 21);
  auto& params = m.params;
  params.n_trees = r.integer<int>(p[2]);
  params.max_depth = r.integer<int>(p[4]);
  params.min_samples_split = r.integer<int>(p[6]);
  params.min_samples_leaf = r.integer<int>(p[8]);
  params.features_per_split = r.integer<int>(p[10]);
  params.class_weights = forest::ClassWeights{r.number(p[12]), r.number(p[14])};
  params.bootstrap = p[16] == "1";
  params.decision_threshold = r.number(p[18]);
  params.seed = r.integer<std::uint64_t>(p[20]);

  const auto tr = r.expect("training", 5);
  m.n_training_rows = r.integer<std::size_t>(tr[2]);
  m.n_training_confused = r.integer<std::size_t>(tr[4]);

  const auto n_trees = r.integer<std::size_t>(r.expect("trees", 2)[1]);
  if (n_trees == 0 || n_trees != static_cast<std::size_t>(params.n_trees)) r.corrupt("tree count mismatch");
  for (std::size_t t = 0; t < n_trees; ++t) {
    const auto header = r.expect("tree", 3);
    if (r.integer<std::size_t>(header[1]) != t) r.corrupt("trees out of order");
    const auto n_nodes = r.integer<std::size_t>(header[2]);
    if (n_nodes == 0) r.corrupt("empty tree");
    forest::Tree tree;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      auto f = r.next();
      forest::Node n;
      if (!f.empty() && f[0] == "leaf" && f.size() == 5) {
        n.prob_confused = r.number(f[1]);
        n.weight_confused = r.number(f[2]);
        n.weight_not_confused = r.number(f[3]);
        n.n_samples = r.integer<std::uint32_t>(f[4]);
      } else if (!f.empty() && f[0] == "split" && f.size() == 9) {
        n.feature = r.integer<int>(f[1]);
        n.threshold = r.number(f[2]);
        n.left = r.integer<int>(f[3]);
        n.right = r.integer<int>(f[4]);
        n.prob_confused = r.number(f[5]);
        n.weight_confused = r.number(f[6]);
        n.weight_not_confused = r.number(f[7]);
        n.n_samples = r.integer<std::uint32_t>(f[8]);
        const auto size = static_cast<int>(n_nodes);
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= m.n_features) r.corrupt("split on unknown slot");
        if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= size || n.right >= size)
          r.corrupt("child index out of range");
      } else {
        --r.pos;
        r.corrupt("expected a node");
      }
      tree.nodes.push_back(n);
    }
    m.trees.push_back(std::move(tree));
  }
  r.expect("end", 1);
  return m;
}

inline void save_model(const forest::Model& m, const std::filesystem::path& path) { write_file(path, encode_model(m)); }

inline forest::Model load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace confadapt::io
