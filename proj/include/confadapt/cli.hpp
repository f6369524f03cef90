#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "confadapt/controller.hpp"
#include "confadapt/core.hpp"
#include "confadapt/features.hpp"
#include "confadapt/forest.hpp"
#include "confadapt/io.hpp"
#include "confadapt/labeler.hpp"
#include "confadapt/pipeline.hpp"
#include "confadapt/simulate.hpp"
#include "confadapt/stats.hpp"

namespace confadapt::cli {

inline constexpr std::string_view kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

struct UsageError : Error {
  using Error::Error;
};

namespace fs = std::filesystem;

// ============================================================================
// Digests
// ============================================================================

inline std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw Error("sha-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

inline std::string file_digest(const fs::path& p) { return sha256_hex(io::read_file(p)); }

// ============================================================================
// Settings: defaults < config file < flags
// ============================================================================

enum class Group { Study, Labeler, Forest, Grid, Bounds, Report, Input };

struct KeyDef {
  std::string name;
  std::string default_value;
  std::string help;
};

namespace detail {

template <typename T>
std::string join(const T& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) out += io::format_double(v);
    else if constexpr (std::is_arithmetic_v<std::decay_t<decltype(v)>>) out += std::to_string(v);
    else out += std::string(confadapt::to_string(v));
  }
  return out;
}

inline std::string range(const simulate::Range& r) { return join(std::array<double, 2>{r.lo, r.hi}); }

}  // namespace detail

inline std::vector<KeyDef> keys(Group g) {
  using io::format_double;
  switch (g) {
    case Group::Study: {
      const simulate::StudyConfig c;
      return {
          {"n_participants", std::to_string(c.n_participants), "number of simulated participants"},
          {"strategies", detail::join(c.strategies), "strategies assigned round-robin"},
          {"failures_per_round", detail::join(c.failures_per_round), "failures in each round"},
          {"difficulty", detail::join(c.difficulty), "base confusion for Pick,Carry,Place"},
          {"adequacy", detail::join(c.adequacy), "confusion reduction for Zero,Low,Medium,High"},
          {"noise_sigma", format_double(c.noise_sigma), "observation noise standard deviation"},
          {"seed", std::to_string(c.seed), "simulation seed"},
          {"propensity", detail::range(c.propensity), "participant propensity range lo,hi"},
          {"familiarity_gain", detail::range(c.familiarity_gain), "per-exposure familiarity range lo,hi"},
          {"expressiveness", detail::range(c.expressiveness), "behavioural expressiveness range lo,hi"},
          {"signal_strength", format_double(c.signal_strength), "emotion offset while confused"},
      };
    }
    case Group::Labeler: {
      const labeler::Thresholds t;
      return {
          {"t_high", format_double(t.t_high), "high-confusion threshold"},
          {"t_change", format_double(t.t_change), "persistent-confusion change threshold"},
      };
    }
    case Group::Forest: {
      const forest::Params p;
      return {
          {"n_trees", std::to_string(p.n_trees), "trees in the forest"},
          {"max_depth", std::to_string(p.max_depth), "maximum tree depth"},
          {"min_samples_split", std::to_string(p.min_samples_split), "minimum rows to split a node"},
          {"min_samples_leaf", std::to_string(p.min_samples_leaf), "minimum rows in a leaf"},
          {"features_per_split", "auto", "slots considered per split, or auto"},
          {"class_weights", "auto", "confused,not_confused weights, or auto"},
          {"bootstrap", p.bootstrap ? "true" : "false", "bootstrap each tree"},
          {"decision_threshold", format_double(p.decision_threshold), "probability needed to predict Confused"},
          {"forest_seed", std::to_string(p.seed), "forest seed"},
      };
    }
    case Group::Grid:
      return {
          {"grid_n_trees", "", "grid values for n_trees"},
          {"grid_max_depth", "", "grid values for max_depth"},
          {"grid_min_samples_split", "", "grid values for min_samples_split"},
          {"grid_min_samples_leaf", "", "grid values for min_samples_leaf"},
          {"grid_features_per_split", "", "grid values for features_per_split"},
      };
    case Group::Bounds: {
      const controller::LevelBounds b;
      return {
          {"e_min", std::string(to_string(b.e_min)), "lowest explanation level"},
          {"e_max", std::string(to_string(b.e_max)), "highest explanation level"},
          {"table_mode", "vs-rest", "vs-rest or goodness-of-fit"},
      };
    }
    case Group::Report:
      return {
          {"group_by", "all", "action, strategy, participant, round or all"},
          {"round", "all", "restrict the breakdown to one round"},
      };
    case Group::Input:
      return {{"strict", "true", "reject invalid datasets instead of dropping episodes"}};
  }
  return {};
}

inline constexpr std::array<Group, 7> kGroups{Group::Study,  Group::Labeler, Group::Forest, Group::Grid,
                                              Group::Bounds, Group::Report,  Group::Input};

inline std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

/// Flat `key = value` lines; `#` starts a comment.
inline std::map<std::string, std::string> parse_config(const std::string& text) {
  std::set<std::string> known;
  for (Group g : kGroups)
    for (const auto& k : keys(g)) known.insert(k.name);

  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };

  std::map<std::string, std::string> out;
  const auto lines = io::lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(i + 1) + ": ";
    if (eq == std::string::npos) throw UsageError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!known.count(key)) throw UsageError(where + "unknown key '" + key + "'");
    if (out.count(key)) throw UsageError(where + "key '" + key + "' repeated");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

struct Setting {
  std::string value;
  std::string source;  // default, config or flag
};

class Settings {
 public:
  std::map<std::string, Setting> values;

  const std::string& raw(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw Error("setting '" + key + "' is not defined for this subcommand");
    return it->second.value;
  }

  double real(const std::string& key) const {
    auto v = io::parse_double(raw(key));
    if (!v) bad(key, "a number");
    return *v;
  }

  template <typename Int = int>
  Int integer(const std::string& key) const {
    auto v = io::parse_int<Int>(raw(key));
    if (!v) bad(key, "an integer");
    return *v;
  }

  bool boolean(const std::string& key) const {
    const auto& s = raw(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    bad(key, "true or false");
  }

  template <typename T, typename F>
  std::vector<T> list(const std::string& key, F parse_one, std::string_view what) const {
    std::vector<T> out;
    const auto& s = raw(key);
    if (s.empty()) return out;
    for (const auto& part : io::split(s, ',')) {
      auto v = parse_one(part);
      if (!v) bad(key, std::string("a comma-separated list of ") + std::string(what));
      out.push_back(*v);
    }
    return out;
  }

  std::vector<double> reals(const std::string& key) const {
    return list<double>(key, [](const std::string& p) { return io::parse_double(p); }, "numbers");
  }

  std::vector<int> integers(const std::string& key) const {
    return list<int>(key, [](const std::string& p) { return io::parse_int<int>(p); }, "integers");
  }

  template <std::size_t N>
  std::array<double, N> fixed(const std::string& key) const {
    const auto v = reals(key);
    if (v.size() != N) bad(key, std::to_string(N) + " comma-separated numbers");
    std::array<double, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }

  std::optional<std::uint64_t> seed_for(std::string_view subcommand) const {
    const std::string key = subcommand == "train" ? "forest_seed" : "seed";
    if (!values.count(key)) return std::nullopt;
    return integer<std::uint64_t>(key);
  }

 private:
  [[noreturn]] static void bad(const std::string& key, const std::string& expected) {
    throw UsageError("setting '" + key + "' must be " + expected);
  }
};

// ============================================================================
// Typed views of the settings
// ============================================================================

template <typename F>
auto checked(F&& f) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

inline simulate::StudyConfig study_config(const Settings& s) {
  simulate::StudyConfig c;
  c.n_participants = s.integer("n_participants");
  c.strategies = s.list<Strategy>("strategies", [](const std::string& p) { return parse_strategy(p); }, "strategies");
  c.failures_per_round = s.integers("failures_per_round");
  c.difficulty = s.fixed<3>("difficulty");
  c.adequacy = s.fixed<4>("adequacy");
  c.noise_sigma = s.real("noise_sigma");
  c.seed = s.integer<std::uint64_t>("seed");
  auto range = [&](const std::string& key) {
    const auto v = s.fixed<2>(key);
    return simulate::Range{v[0], v[1]};
  };
  c.propensity = range("propensity");
  c.familiarity_gain = range("familiarity_gain");
  c.expressiveness = range("expressiveness");
  c.signal_strength = s.real("signal_strength");
  checked([&] {
    simulate::validate(c);
    return 0;
  });
  return c;
}

inline labeler::Thresholds thresholds(const Settings& s) {
  labeler::Thresholds t{s.real("t_high"), s.real("t_change")};
  checked([&] {
    labeler::require_valid(t);
    return 0;
  });
  return t;
}

inline forest::Params forest_params(const Settings& s) {
  forest::Params p;
  p.n_trees = s.integer("n_trees");
  p.max_depth = s.integer("max_depth");
  p.min_samples_split = s.integer("min_samples_split");
  p.min_samples_leaf = s.integer("min_samples_leaf");
  if (s.raw("features_per_split") != "auto") p.features_per_split = s.integer("features_per_split");
  if (s.raw("class_weights") != "auto") {
    const auto w = s.fixed<2>("class_weights");
    p.class_weights = forest::ClassWeights{w[0], w[1]};
  }
  p.bootstrap = s.boolean("bootstrap");
  p.decision_threshold = s.real("decision_threshold");
  p.seed = s.integer<std::uint64_t>("forest_seed");
  checked([&] {
    forest::validate(p);
    return 0;
  });
  return p;
}

inline forest::Grid grid(const Settings& s) {
  return {s.integers("grid_n_trees"), s.integers("grid_max_depth"), s.integers("grid_min_samples_split"),
          s.integers("grid_min_samples_leaf"), s.integers("grid_features_per_split")};
}

inline controller::LevelBounds bounds(const Settings& s) {
  auto level = [&](const std::string& key) {
    auto l = parse_level(s.raw(key));
    if (!l) throw UsageError("setting '" + key + "' must be Zero, Low, Medium or High");
    return *l;
  };
  controller::LevelBounds b{level("e_min"), level("e_max")};
  if (!b.valid()) throw UsageError("e_min is above e_max");
  return b;
}

inline controller::TableMode table_mode(const Settings& s) {
  const auto& m = s.raw("table_mode");
  if (m == "vs-rest") return controller::TableMode::VsRest;
  if (m == "goodness-of-fit") return controller::TableMode::GoodnessOfFit;
  throw UsageError("setting 'table_mode' must be vs-rest or goodness-of-fit");
}

inline io::ReadMode read_mode(const Settings& s) {
  return s.boolean("strict") ? io::ReadMode::Strict : io::ReadMode::Lenient;
}

// ============================================================================
// Report tables
// ============================================================================

namespace tables {

using io::format_double;
using io::Table;

inline std::vector<std::string> fold_cells(const forest::FoldReport& f, std::size_t n_test) {
  const auto& c = f.counts;
  const auto& m = f.metrics;
  return {f.participant_id,          std::to_string(f.n_train),  std::to_string(n_test),
          std::to_string(c.tp),      std::to_string(c.fp),       std::to_string(c.tn),
          std::to_string(c.fn),      format_double(m.accuracy),  format_double(m.precision),
          format_double(m.recall),   format_double(m.f1),        m.f1_degenerate ? "1" : "0"};
}

inline Table folds(const std::vector<forest::FoldReport>& reports) {
  Table t{{"participant_id", "n_train", "n_test", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f1",
           "f1_degenerate"},
          {}};
  for (const auto& f : reports) t.rows.push_back(fold_cells(f, f.counts.total()));
  return t;
}

inline Table cv(const forest::CvReport& rep) {
  Table t = folds(rep.folds);
  const auto& a = rep.aggregate;
  t.rows.push_back({"mean", "", std::to_string(a.n_folds), "", "", "", "", format_double(a.accuracy),
                    format_double(a.precision), format_double(a.recall), format_double(a.f1),
                    std::to_string(a.n_folds - a.f1_folds)});
  const auto& p = a.pooled;
  const auto& m = a.pooled_metrics;
  t.rows.push_back({"pooled", "", std::to_string(p.total()), std::to_string(p.tp), std::to_string(p.fp),
                    std::to_string(p.tn), std::to_string(p.fn), format_double(m.accuracy), format_double(m.precision),
                    format_double(m.recall), format_double(m.f1), m.f1_degenerate ? "1" : "0"});
  return t;
}

inline std::string params_text(const forest::Params& p) {
  return "n_trees=" + std::to_string(p.n_trees) + ";max_depth=" + std::to_string(p.max_depth) +
         ";min_samples_split=" + std::to_string(p.min_samples_split) +
         ";min_samples_leaf=" + std::to_string(p.min_samples_leaf) +
         ";features_per_split=" + (p.features_per_split ? std::to_string(*p.features_per_split) : "auto");
}

inline Table grid(const forest::GridResult& g) {
  Table t{{"params", "accuracy", "precision", "recall", "f1", "best"}, {}};
  for (const auto& r : g.table)
    t.rows.push_back({params_text(r.params), format_double(r.result.accuracy), format_double(r.result.precision),
                      format_double(r.result.recall), format_double(r.result.f1),
                      params_text(r.params) == params_text(g.best) ? "1" : "0"});
  return t;
}

inline Table replay_records(const controller::ReplayResult& r) {
  Table t{{"participant_id", "round", "object_index", "action", "e_current", "suggested", "new_level", "realized",
           "outcome", "state", "rule"},
          {}};
  for (const auto& rec : r.records)
    t.rows.push_back({rec.key.participant_id, std::to_string(rec.key.round), std::to_string(rec.key.object_index),
                      std::string(to_string(rec.action)), std::string(to_string(rec.e_current)),
                      std::string(controller::to_string(rec.suggested)), std::string(to_string(rec.new_level)),
                      std::string(to_string(rec.realized)), std::string(controller::to_string(rec.outcome)),
                      std::string(to_string(rec.actual.state)), std::string(to_string(rec.actual.rule))});
  return t;
}

inline controller::OutcomeTotals totals_from_records(const Table& t) {
  if (t.header != replay_records({}).header) throw io::ParseError(1, "", "unexpected replay records header");
  controller::OutcomeTotals totals;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    std::optional<controller::Outcome> outcome;
    for (auto o : controller::kOutcomes)
      if (controller::to_string(o) == r[8]) outcome = o;
    if (!outcome) throw io::ParseError(i + 2, "outcome", "unknown outcome '" + r[8] + "'");
    auto state = parse_state(r[9]);
    if (!state) throw io::ParseError(i + 2, "state", "unknown state '" + r[9] + "'");
    totals.add(*outcome, *state == ConfusionState::Confused);
  }
  return totals;
}

inline Table totals(const controller::OutcomeTotals& t) {
  Table out{{"outcome", "confused", "not_confused", "confused_rate"}, {}};
  for (auto o : controller::kOutcomes)
    out.rows.push_back({std::string(controller::to_string(o)), std::to_string(t.confused(o)),
                        std::to_string(t.not_confused(o)), format_double(t.confusion_rate(o))});
  return out;
}

inline std::string verdict(const controller::HypothesisResult& h) {
  if (!h.evaluable) return "not evaluable";
  return h.significant ? "significant" : "not significant";
}

inline Table hypotheses(const std::vector<controller::HypothesisResult>& hs) {
  Table t{{"hypothesis", "group", "alpha", "a", "b", "c", "d", "group_rate", "rest_rate", "statistic", "p_value",
           "verdict", "note"},
          {}};
  for (const auto& h : hs) {
    std::string group;
    for (auto o : h.group) group += (group.empty() ? "" : "+") + std::string(controller::to_string(o));
    std::string note = h.note;
    std::replace(note.begin(), note.end(), ',', ';');
    t.rows.push_back({h.name, group, format_double(h.alpha), std::to_string(h.table.a), std::to_string(h.table.b),
                      std::to_string(h.table.c), std::to_string(h.table.d), format_double(h.group_rate),
                      format_double(h.rest_rate), h.evaluable ? format_double(h.chi.statistic) : "",
                      h.evaluable ? format_double(h.chi.p_value) : "", verdict(h), note});
  }
  return t;
}

inline Table breakdown(const Dataset& d, const std::vector<labeler::KeyedLabel>& labels, const std::string& group_by,
                       std::optional<int> round) {
  Table t{{"group_by", "group", "n", "n_confused", "confused_pct", "not_confused_pct"}, {}};
  std::vector<std::string> kinds;
  if (group_by == "all") kinds = {"action", "strategy", "participant", "round"};
  else kinds = {group_by};
  for (const auto& kind : kinds) {
    auto by = stats::parse_group_by(kind);
    if (!by) throw UsageError("setting 'group_by' must be action, strategy, participant, round or all");
    for (const auto& r : stats::confusion_breakdown(d, labels, *by, round))
      t.rows.push_back({kind, r.group, std::to_string(r.n), std::to_string(r.n_confused),
                        format_double(r.confused_pct), format_double(r.not_confused_pct)});
  }
  return t;
}

inline Table summary(const pipeline::Result& r, std::uint64_t seed) {
  Table t{{"metric", "value"}, {}};
  auto add = [&](std::string k, std::string v) { t.rows.push_back({std::move(k), std::move(v)}); };
  std::size_t confused = 0;
  for (const auto& l : r.labels) confused += l.label.confused();
  const auto& a = r.cv.aggregate;
  add("seed", std::to_string(seed));
  add("participants", std::to_string(r.study.profiles.size()));
  add("episodes", std::to_string(r.study.dataset.episodes.size()));
  add("labeler_agreement", format_double(r.labeler_agreement));
  add("confused_rate", format_double(r.labels.empty() ? 0.0 : double(confused) / double(r.labels.size())));
  add("training_rows", std::to_string(r.training.rows.size()));
  add("cv_folds", std::to_string(a.n_folds));
  add("cv_accuracy", format_double(a.accuracy));
  add("cv_precision", format_double(a.precision));
  add("cv_recall", format_double(a.recall));
  add("cv_f1", format_double(a.f1));
  add("cv_f1_folds", std::to_string(a.f1_folds));
  add("pooled_accuracy", format_double(a.pooled_metrics.accuracy));
  add("pooled_f1", format_double(a.pooled_metrics.f1));
  for (auto o : controller::kOutcomes) {
    const std::string name(controller::to_string(o));
    add(name + "_confused", std::to_string(r.replay.totals.confused(o)));
    add(name + "_not_confused", std::to_string(r.replay.totals.not_confused(o)));
  }
  for (const auto& h : r.hypotheses) {
    add(h.name + "_p_value", h.evaluable ? format_double(h.chi.p_value) : "");
    add(h.name + "_verdict", verdict(h));
  }
  return t;
}

}  // namespace tables

// ============================================================================
// Manifest
// ============================================================================

struct Run {
  std::string subcommand;
  Settings settings;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  fs::path manifest_path;
};

inline nlohmann::ordered_json manifest_json(const Run& run) {
  nlohmann::ordered_json j;
  j["subcommand"] = run.subcommand;
  j["version"] = std::string(kVersion);
  const auto seed = run.settings.seed_for(run.subcommand);
  j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json();
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : run.settings.values) cfg[k] = {{"value", v.value}, {"source", v.source}};
  j["config"] = std::move(cfg);
  auto files = [](const std::vector<fs::path>& paths) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& p : paths) a.push_back({{"path", p.generic_string()}, {"sha256", file_digest(p)}});
    return a;
  };
  j["inputs"] = files(run.inputs);
  j["outputs"] = files(run.outputs);
  return j;
}

inline void write_manifest(const Run& run) { io::write_file(run.manifest_path, manifest_json(run).dump(2) + "\n"); }

// ============================================================================
// Subcommands
// ============================================================================

struct Paths {
  std::string config, input, labels, features, model, replay_records;
  std::string out, truth, cv_report, grid_report, hypotheses, totals, out_dir, manifest;
  bool end_to_end = false;
};

inline fs::path sibling(const fs::path& primary, std::string_view suffix) {
  fs::path p = primary;
  p.replace_filename(primary.stem().string() + std::string(suffix));
  return p;
}

inline void require(const std::string& value, std::string_view flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

namespace detail {

inline bool same_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  return fs::weakly_canonical(fs::absolute(a), ec) == fs::weakly_canonical(fs::absolute(b), ec);
}

inline void check_no_overwrite(const Run& run) {
  for (const auto& o : run.outputs)
    for (const auto& i : run.inputs)
      if (same_file(o, i)) throw UsageError("output " + o.string() + " would overwrite input " + i.string());
}

}  // namespace detail

inline Dataset load_dataset(const fs::path& p, const Settings& s, std::ostream& err) {
  std::vector<std::string> warnings;
  Dataset d = io::read_dataset(p, read_mode(s), &warnings);
  for (const auto& w : warnings) err << "warning: dropped episode, " << w << "\n";
  return d;
}

inline void cmd_simulate(Run& run, const Paths& p, std::ostream&, std::ostream&) {
  require(p.out, "--out");
  const auto cfg = study_config(run.settings);
  run.outputs = {p.out, p.truth.empty() ? sibling(p.out, ".truth.csv") : fs::path(p.truth)};
  detail::check_no_overwrite(run);
  const auto study = simulate::simulate_study(cfg);
  io::write_dataset(study.dataset, run.outputs[0]);
  io::write_labels(study.truth_labels(), run.outputs[1]);
}

inline void cmd_label(Run& run, const Paths& p, std::ostream&, std::ostream& err) {
  require(p.input, "--input");
  require(p.out, "--out");
  run.outputs = {p.out};
  detail::check_no_overwrite(run);
  const auto th = thresholds(run.settings);
  const auto d = load_dataset(p.input, run.settings, err);
  io::write_labels(labeler::label_dataset(d, th), p.out);
}

inline void cmd_featurize(Run& run, const Paths& p, std::ostream&, std::ostream& err) {
  require(p.input, "--input");
  require(p.labels, "--labels");
  require(p.out, "--out");
  run.outputs = {p.out};
  detail::check_no_overwrite(run);
  const auto d = load_dataset(p.input, run.settings, err);
  const auto labels = io::align_labels(d, io::read_labels(p.labels));
  const auto ts = features::build_training_set(d, labels);
  io::write_features(ts.rows, p.out);
}

inline void cmd_train(Run& run, const Paths& p, std::ostream& out, std::ostream&) {
  require(p.features, "--features");
  require(p.out, "--out");
  const bool use_grid = !p.grid_report.empty();
  run.outputs = {p.out, p.cv_report.empty() ? sibling(p.out, ".cv.csv") : fs::path(p.cv_report)};
  if (use_grid) run.outputs.push_back(p.grid_report);
  detail::check_no_overwrite(run);

  auto rows = io::read_features(p.features);
  if (!p.labels.empty()) {
    std::map<EpisodeKey, ConfusionState> by_key;
    for (const auto& l : io::read_labels(p.labels)) by_key[l.key] = l.label.state;
    for (auto& r : rows) {
      auto it = by_key.find(r.key);
      if (it == by_key.end()) throw InvalidArgument("labels file has no entry for " + to_string(r.key));
      r.y = it->second;
    }
  }
  if (rows.empty()) throw InvalidArgument("feature matrix has no rows");
  const auto samples = forest::to_samples(rows);

  forest::Params params = forest_params(run.settings);
  if (use_grid) {
    const auto g = forest::grid_search(samples, grid(run.settings), params);
    tables::grid(g).write(run.outputs[2]);
    params = g.best;
  }
  const auto cv = forest::lopo_cv(samples, params);
  tables::cv(cv).write(run.outputs[1]);
  io::save_model(forest::train_forest(samples, params), p.out);
  out << "cv_accuracy " << io::format_double(cv.aggregate.accuracy) << "\n"
      << "cv_f1 " << io::format_double(cv.aggregate.f1) << "\n";
}

inline void cmd_evaluate(Run& run, const Paths& p, std::ostream&, std::ostream&) {
  require(p.model, "--model");
  require(p.features, "--features");
  require(p.out, "--out");
  run.outputs = {p.out};
  detail::check_no_overwrite(run);
  const auto model = io::load_model(p.model);
  const auto samples = forest::to_samples(io::read_features(p.features));
  if (samples.empty()) throw InvalidArgument("feature matrix has no rows");

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_participant;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, fresh] = by_participant.try_emplace(samples[i].group);
    if (fresh) order.push_back(samples[i].group);
    it->second.push_back(i);
  }
  std::vector<forest::FoldReport> reports;
  stats::ConfusionCounts all;
  for (const auto& id : order) {
    const auto c = forest::count_predictions(model, samples, by_participant[id]);
    all += c;
    reports.push_back(forest::fold_report(id, c, model.n_training_rows));
  }
  reports.push_back(forest::fold_report("all", all, model.n_training_rows));
  tables::folds(reports).write(p.out);
}

inline void cmd_replay(Run& run, const Paths& p, std::ostream&, std::ostream& err) {
  require(p.input, "--input");
  require(p.labels, "--labels");
  require(p.model, "--model");
  require(p.out, "--out");
  run.outputs = {p.out, p.hypotheses.empty() ? sibling(p.out, ".hypotheses.csv") : fs::path(p.hypotheses),
                 p.totals.empty() ? sibling(p.out, ".totals.csv") : fs::path(p.totals)};
  detail::check_no_overwrite(run);
  const auto b = bounds(run.settings);
  const auto mode = table_mode(run.settings);
  const auto d = load_dataset(p.input, run.settings, err);
  const auto labels = io::align_labels(d, io::read_labels(p.labels));
  const auto model = io::load_model(p.model);
  const auto r = controller::replay(d, labels, model, b);
  tables::replay_records(r).write(run.outputs[0]);
  tables::hypotheses(controller::evaluate_hypotheses(r.totals, mode)).write(run.outputs[1]);
  tables::totals(r.totals).write(run.outputs[2]);
}

inline std::optional<int> round_filter(const Settings& s) {
  if (s.raw("round") == "all") return std::nullopt;
  const int r = s.integer("round");
  if (r < 1 || r > 4) throw UsageError("setting 'round' must be 1 to 4 or all");
  return r;
}

inline void cmd_end_to_end(Run& run, const Paths& p, std::ostream& out) {
  require(p.out_dir, "--out-dir");
  const fs::path dir = p.out_dir;
  pipeline::Config cfg{study_config(run.settings), thresholds(run.settings), forest_params(run.settings),
                       bounds(run.settings), table_mode(run.settings)};
  const auto round = round_filter(run.settings);
  const std::string group_by = run.settings.raw("group_by");

  const std::vector<std::string> names{"dataset.jsonl", "truth.csv",    "labels.csv",     "features.csv",
                                       "cv_report.csv", "replay.csv",   "totals.csv",     "hypotheses.csv",
                                       "breakdown.csv", "summary.csv"};
  for (const auto& n : names) run.outputs.push_back(dir / n);
  if (p.manifest.empty()) run.manifest_path = dir / "manifest.json";
  detail::check_no_overwrite(run);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create " + dir.string() + ": " + ec.message());

  const auto r = pipeline::run(cfg);
  io::write_dataset(r.study.dataset, run.outputs[0]);
  io::write_labels(r.study.truth_labels(), run.outputs[1]);
  io::write_labels(r.labels, run.outputs[2]);
  io::write_features(r.training.rows, run.outputs[3]);
  tables::cv(r.cv).write(run.outputs[4]);
  tables::replay_records(r.replay).write(run.outputs[5]);
  tables::totals(r.replay.totals).write(run.outputs[6]);
  tables::hypotheses(r.hypotheses).write(run.outputs[7]);
  tables::breakdown(r.study.dataset, r.labels, group_by, round).write(run.outputs[8]);
  const auto summary = tables::summary(r, cfg.study.seed);
  summary.write(run.outputs[9]);
  out << summary.to_string();
}

inline void cmd_report(Run& run, const Paths& p, std::ostream& out, std::ostream& err) {
  if (p.end_to_end) return cmd_end_to_end(run, p, out);
  require(p.input, "--input");
  require(p.labels, "--labels");
  require(p.out, "--out");
  run.outputs = {p.out};
  if (!p.replay_records.empty())
    run.outputs.push_back(p.hypotheses.empty() ? sibling(p.out, ".hypotheses.csv") : fs::path(p.hypotheses));
  detail::check_no_overwrite(run);
  const auto round = round_filter(run.settings);
  const auto mode = table_mode(run.settings);
  const auto d = load_dataset(p.input, run.settings, err);
  const auto labels = io::align_labels(d, io::read_labels(p.labels));
  tables::breakdown(d, labels, run.settings.raw("group_by"), round).write(p.out);
  if (!p.replay_records.empty()) {
    const auto totals = tables::totals_from_records(io::Table::parse(io::read_file(p.replay_records), "replay"));
    tables::hypotheses(controller::evaluate_hypotheses(totals, mode)).write(run.outputs[1]);
  }
}

// ============================================================================
// Entry point
// ============================================================================

struct SubcommandSpec {
  std::string_view name;
  std::string_view help;
  std::vector<Group> groups;
};

inline std::vector<SubcommandSpec> subcommands() {
  return {
      {"simulate", "generate a synthetic study and its ground truth", {Group::Study}},
      {"label", "label every episode as Confused or NotConfused", {Group::Labeler, Group::Input}},
      {"featurize", "build the feature matrix from a dataset and labels", {Group::Input}},
      {"train", "cross-validate and train a forest", {Group::Forest, Group::Grid}},
      {"evaluate", "score a trained model on a feature matrix", {}},
      {"replay", "replay the explanation-level controller", {Group::Bounds, Group::Input}},
      {"report",
       "confusion breakdowns, hypothesis tests, or the whole pipeline",
       {Group::Study, Group::Labeler, Group::Forest, Group::Bounds, Group::Report, Group::Input}},
  };
}

inline void print_violations(const io::ValidationError& e, std::ostream& err) {
  err << "error: dataset failed validation with " << e.violations.size() << " violation(s)\n";
  const std::size_t shown = std::min<std::size_t>(10, e.violations.size());
  for (std::size_t i = 0; i < shown; ++i) err << "  " << e.violations[i] << "\n";
  if (e.violations.size() > shown) err << "  ... " << e.violations.size() - shown << " more\n";
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Confusion-induction labeling, prediction and explanation-level control", "confadapt"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);

  Paths paths;
  std::map<std::string, std::map<std::string, std::string>> flag_values;
  std::map<std::string, std::map<std::string, CLI::Option*>> flag_opts;
  std::map<std::string, CLI::App*> apps;

  for (const auto& spec : subcommands()) {
    const std::string name(spec.name);
    CLI::App* sub = app.add_subcommand(name, std::string(spec.help));
    apps[name] = sub;
    sub->add_option("--config", paths.config, "flat key = value settings file");
    sub->add_option("--manifest", paths.manifest, "where to write the run manifest");
    for (Group g : spec.groups)
      for (const auto& k : keys(g))
        flag_opts[name][k.name] =
            sub->add_option(flag_name(k.name), flag_values[name][k.name], k.help + " (default: " +
                                                                                (k.default_value.empty() ? "none"
                                                                                                         : k.default_value) +
                                                                                ")");
  }
  apps["simulate"]->add_option("--out", paths.out, "dataset output");
  apps["simulate"]->add_option("--truth", paths.truth, "ground-truth labels output");
  apps["label"]->add_option("--input", paths.input, "dataset");
  apps["label"]->add_option("--out", paths.out, "labels output");
  apps["featurize"]->add_option("--input", paths.input, "dataset");
  apps["featurize"]->add_option("--labels", paths.labels, "labels");
  apps["featurize"]->add_option("--out", paths.out, "feature matrix output");
  apps["train"]->add_option("--features", paths.features, "feature matrix");
  apps["train"]->add_option("--labels", paths.labels, "labels replacing the matrix's class column");
  apps["train"]->add_option("--out", paths.out, "model output");
  apps["train"]->add_option("--cv-report", paths.cv_report, "cross-validation report output");
  apps["train"]->add_option("--grid-report", paths.grid_report, "run the grid search and write its table here");
  apps["evaluate"]->add_option("--model", paths.model, "trained model");
  apps["evaluate"]->add_option("--features", paths.features, "feature matrix");
  apps["evaluate"]->add_option("--out", paths.out, "per-participant report output");
  apps["replay"]->add_option("--input", paths.input, "dataset");
  apps["replay"]->add_option("--labels", paths.labels, "labels");
  apps["replay"]->add_option("--model", paths.model, "trained model");
  apps["replay"]->add_option("--out", paths.out, "per-episode outcome output");
  apps["replay"]->add_option("--hypotheses", paths.hypotheses, "hypothesis test output");
  apps["replay"]->add_option("--totals", paths.totals, "outcome totals output");
  apps["report"]->add_option("--input", paths.input, "dataset");
  apps["report"]->add_option("--labels", paths.labels, "labels");
  apps["report"]->add_option("--out", paths.out, "breakdown output");
  apps["report"]->add_option("--replay", paths.replay_records, "replay outcomes to test hypotheses on");
  apps["report"]->add_option("--hypotheses", paths.hypotheses, "hypothesis test output");
  apps["report"]->add_flag("--end-to-end", paths.end_to_end, "simulate, label, train, replay and test in one run");
  apps["report"]->add_option("--out-dir", paths.out_dir, "output directory for --end-to-end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    CLI::App* shown = &app;
    for (auto* sub : app.get_subcommands()) shown = sub;
    err << shown->help();
    return kUsage;
  }

  try {
    Run run;
    const SubcommandSpec* spec = nullptr;
    const auto specs = subcommands();
    for (const auto& s : specs)
      if (apps[std::string(s.name)]->parsed()) spec = &s;
    if (!spec) throw UsageError("a subcommand is required");
    run.subcommand = std::string(spec->name);

    std::map<std::string, std::string> from_config;
    if (!paths.config.empty()) {
      from_config = parse_config(io::read_file(paths.config));
      run.inputs.push_back(paths.config);
    }
    for (Group g : spec->groups) {
      for (const auto& k : keys(g)) {
        Setting s{k.default_value, "default"};
        if (auto it = from_config.find(k.name); it != from_config.end()) s = {it->second, "config"};
        if (flag_opts[run.subcommand][k.name]->count() > 0) s = {flag_values[run.subcommand][k.name], "flag"};
        run.settings.values[k.name] = s;
      }
    }

    for (const auto* f : {&paths.input, &paths.labels, &paths.features, &paths.model, &paths.replay_records})
      if (!f->empty()) run.inputs.push_back(*f);

    using Handler = void (*)(Run&, const Paths&, std::ostream&, std::ostream&);
    static const std::map<std::string, Handler> handlers{
        {"simulate", cmd_simulate}, {"label", cmd_label},   {"featurize", cmd_featurize}, {"train", cmd_train},
        {"evaluate", cmd_evaluate}, {"replay", cmd_replay}, {"report", cmd_report},
    };
    if (!paths.manifest.empty()) run.manifest_path = paths.manifest;
    handlers.at(run.subcommand)(run, paths, out, err);
    if (run.manifest_path.empty()) run.manifest_path = fs::path(run.outputs.front().string() + ".manifest.json");
    write_manifest(run);
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::ValidationError& e) {
    print_violations(e, err);
    return kDataError;
  } catch (const io::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const io::CorruptFile& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const io::VersionMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace confadapt::cli
