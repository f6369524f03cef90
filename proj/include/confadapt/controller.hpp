#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "confadapt/core.hpp"
#include "confadapt/features.hpp"
#include "confadapt/forest.hpp"
#include "confadapt/labeler.hpp"
#include "confadapt/stats.hpp"

namespace confadapt::controller {

struct LevelBounds {
  ExplanationLevel e_min = ExplanationLevel::Low;
  ExplanationLevel e_max = ExplanationLevel::High;

  bool valid() const { return rank(e_min) <= rank(e_max); }
  bool contains(ExplanationLevel l) const { return rank(e_min) <= rank(l) && rank(l) <= rank(e_max); }
  ExplanationLevel clamp(int r) const { return level_from_rank(std::clamp(r, rank(e_min), rank(e_max))); }
};

enum class Suggestion : std::uint8_t { Decrease, Same, Increase };

inline std::string_view to_string(Suggestion s) {
  switch (s) {
    case Suggestion::Decrease: return "Decrease";
    case Suggestion::Same: return "Same";
    case Suggestion::Increase: return "Increase";
  }
  return "?";
}

struct PredictorCall {
  bool decrease_flag = false;
  ConfusionState predicted = ConfusionState::NotConfused;

  bool operator==(const PredictorCall&) const = default;
};

struct Decision {
  Suggestion suggested = Suggestion::Same;
  ExplanationLevel new_level = ExplanationLevel::High;
  std::vector<PredictorCall> calls;
};

template <typename F>
concept Predictor = std::invocable<F&, const features::FeatureVector&> &&
                    std::convertible_to<std::invoke_result_t<F&, const features::FeatureVector&>, ConfusionState>;

/// Adjusts the explanation level by at most one step. The predictor sees the
/// same behavioural features twice, differing only in the decrease flag; the
/// second call happens only when a decrease is predicted to confuse.
template <Predictor F>
Decision decide(F&& predictor, features::FeatureVector basis, ExplanationLevel e_current, const LevelBounds& bounds) {
  if (!bounds.valid()) throw InvalidArgument("level bounds have e_min above e_max");
  if (!bounds.contains(e_current))
    throw InvalidArgument("current level " + std::string(confadapt::to_string(e_current)) + " outside bounds");

  Decision d;
  basis[features::kDecreaseSlot] = 1.0;
  const ConfusionState with_decrease = predictor(std::as_const(basis));
  d.calls.push_back({true, with_decrease});
  if (with_decrease == ConfusionState::NotConfused) {
    d.suggested = Suggestion::Decrease;
    d.new_level = bounds.clamp(rank(e_current) - 1);
    return d;
  }
  basis[features::kDecreaseSlot] = 0.0;
  const ConfusionState keep = predictor(std::as_const(basis));
  d.calls.push_back({false, keep});
  if (keep == ConfusionState::Confused) {
    d.suggested = Suggestion::Increase;
    d.new_level = bounds.clamp(rank(e_current) + 1);
  } else {
    d.suggested = Suggestion::Same;
    d.new_level = e_current;
  }
  return d;
}

/// Wraps a trained model as a predictor.
inline auto model_predictor(const forest::Model& m) {
  return [&m](const features::FeatureVector& x) { return forest::predict(m, x).cls; };
}

// ============================================================================
// Outcomes
// ============================================================================

enum class Outcome : std::uint8_t {
  IncreaseFollowed,
  IncreaseNotFollowed,
  SameFollowed,
  SameNotFollowed,
  DecreaseFollowed,
  DecreaseNotFollowed,
};

inline constexpr std::array<Outcome, 6> kOutcomes{Outcome::IncreaseFollowed, Outcome::IncreaseNotFollowed,
                                                  Outcome::SameFollowed,     Outcome::SameNotFollowed,
                                                  Outcome::DecreaseFollowed, Outcome::DecreaseNotFollowed};

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::IncreaseFollowed: return "IncreaseFollowed";
    case Outcome::IncreaseNotFollowed: return "IncreaseNotFollowed";
    case Outcome::SameFollowed: return "SameFollowed";
    case Outcome::SameNotFollowed: return "SameNotFollowed";
    case Outcome::DecreaseFollowed: return "DecreaseFollowed";
    case Outcome::DecreaseNotFollowed: return "DecreaseNotFollowed";
  }
  return "?";
}

inline Outcome categorize(Suggestion suggested, ExplanationLevel realized, ExplanationLevel e_current) {
  const int delta = rank(realized) - rank(e_current);
  switch (suggested) {
    case Suggestion::Increase: return delta > 0 ? Outcome::IncreaseFollowed : Outcome::IncreaseNotFollowed;
    case Suggestion::Same: return delta == 0 ? Outcome::SameFollowed : Outcome::SameNotFollowed;
    case Suggestion::Decrease: return delta < 0 ? Outcome::DecreaseFollowed : Outcome::DecreaseNotFollowed;
  }
  return Outcome::SameNotFollowed;
}

inline Outcome categorize(const Decision& d, ExplanationLevel realized, ExplanationLevel e_current) {
  return categorize(d.suggested, realized, e_current);
}

/// Confused / NotConfused counts per outcome category.
struct OutcomeTotals {
  std::array<std::array<std::size_t, 2>, kOutcomes.size()> counts{};  // [outcome][0=C, 1=NC]

  std::size_t confused(Outcome o) const { return counts[static_cast<std::size_t>(o)][0]; }
  std::size_t not_confused(Outcome o) const { return counts[static_cast<std::size_t>(o)][1]; }
  std::size_t total(Outcome o) const { return confused(o) + not_confused(o); }
  void add(Outcome o, bool is_confused) { ++counts[static_cast<std::size_t>(o)][is_confused ? 0 : 1]; }
  void set(Outcome o, std::size_t c, std::size_t nc) { counts[static_cast<std::size_t>(o)] = {c, nc}; }

  double confusion_rate(Outcome o) const {
    return total(o) ? static_cast<double>(confused(o)) / static_cast<double>(total(o)) : 0.0;
  }

  bool operator==(const OutcomeTotals&) const = default;
};

// ============================================================================
// Replay
// ============================================================================

struct ReplayRecord {
  EpisodeKey key;
  Action action = Action::Pick;
  ExplanationLevel e_current = ExplanationLevel::High;
  Suggestion suggested = Suggestion::Same;
  ExplanationLevel new_level = ExplanationLevel::High;
  ExplanationLevel realized = ExplanationLevel::High;
  Outcome outcome = Outcome::SameFollowed;
  ConfusionLabel actual;
};

struct ReplayResult {
  std::vector<ReplayRecord> records;
  OutcomeTotals totals;
};

/// Replays the controller over every episode with same-action history. The
/// current level is the one delivered at that previous failure and the
/// realized level is the episode's own. `predictor_for(episode)` returns the
/// predictor used for that episode, which allows cross-fitted models.
/// A current level below e_min (schedules can reach Zero) widens the lower
/// bound for that episode only.
template <typename PredictorFor>
ReplayResult replay(const Dataset& d, const std::vector<labeler::KeyedLabel>& labels, PredictorFor&& predictor_for,
                    const LevelBounds& bounds = {}) {
  if (!bounds.valid()) throw InvalidArgument("level bounds have e_min above e_max");
  std::map<EpisodeKey, ConfusionLabel> by_key;
  for (const auto& l : labels) by_key[l.key] = l.label;

  ReplayResult out;
  const auto prev = features::previous_same_action(d);
  for (std::size_t i = 0; i < d.episodes.size(); ++i) {
    if (prev[i] < 0) continue;
    const auto& cur = d.episodes[i];
    const auto& last = d.episodes[static_cast<std::size_t>(prev[i])];
    auto lab = by_key.find(cur.key());
    if (lab == by_key.end()) throw InvalidArgument("no label for episode " + to_string(cur.key()));

    const ExplanationLevel e_current = last.delivered_level;
    LevelBounds b = bounds;
    if (rank(e_current) < rank(b.e_min)) b.e_min = e_current;
    if (rank(e_current) > rank(b.e_max)) b.e_max = e_current;

    auto&& predictor = predictor_for(cur);
    const auto basis = features::extract_features(cur, last, e_current);
    const Decision dec = decide(predictor, basis, e_current, b);

    ReplayRecord r;
    r.key = cur.key();
    r.action = cur.action;
    r.e_current = e_current;
    r.suggested = dec.suggested;
    r.new_level = dec.new_level;
    r.realized = cur.delivered_level;
    r.outcome = categorize(dec, r.realized, e_current);
    r.actual = lab->second;
    out.totals.add(r.outcome, r.actual.confused());
    out.records.push_back(std::move(r));
  }
  return out;
}

inline ReplayResult replay(const Dataset& d, const std::vector<labeler::KeyedLabel>& labels, const forest::Model& m,
                           const LevelBounds& bounds = {}) {
  auto p = model_predictor(m);
  return replay(
      d, labels, [&p](const FailureEpisode&) -> decltype(p)& { return p; }, bounds);
}

// ============================================================================
// Hypotheses
// ============================================================================

enum class TableMode { VsRest, GoodnessOfFit };

struct HypothesisResult {
  std::string name;
  std::vector<Outcome> group;
  double alpha = 0.05;
  bool evaluable = false;
  std::string note;
  stats::Table2x2 table;
  stats::ChiSquareResult chi;
  bool significant = false;
  double group_rate = 0.0;  // confused share inside the group
  double rest_rate = 0.0;
};

struct HypothesisSpec {
  std::string_view name;
  std::vector<Outcome> group;
  double alpha;
};

/// H1: increase suggested but not followed. H2: same suggested and followed.
/// H3: decrease suggested, followed or not.
inline std::vector<HypothesisSpec> hypotheses() {
  return {
      {"H1", {Outcome::IncreaseNotFollowed}, 1e-5},
      {"H2", {Outcome::SameFollowed}, 0.05},
      {"H3", {Outcome::DecreaseFollowed, Outcome::DecreaseNotFollowed}, 0.005},
  };
}

inline std::vector<HypothesisResult> evaluate_hypotheses(const OutcomeTotals& totals, TableMode mode = TableMode::VsRest) {
  std::vector<HypothesisResult> out;
  for (const auto& h : hypotheses()) {
    HypothesisResult r;
    r.name = std::string(h.name);
    r.group = h.group;
    r.alpha = h.alpha;
    for (Outcome o : kOutcomes) {
      const bool in = std::find(h.group.begin(), h.group.end(), o) != h.group.end();
      (in ? r.table.a : r.table.c) += totals.confused(o);
      (in ? r.table.b : r.table.d) += totals.not_confused(o);
    }
    if (r.table.a + r.table.b == 0) {
      r.note = "empty category";
      out.push_back(r);
      continue;
    }
    r.group_rate = double(r.table.a) / double(r.table.a + r.table.b);
    const auto rest = r.table.c + r.table.d;
    r.rest_rate = rest ? double(r.table.c) / double(rest) : 0.0;
    try {
      r.chi = mode == TableMode::VsRest ? stats::chi_square_2x2(r.table) : stats::chi_square_goodness_of_fit(r.table);
      r.evaluable = true;
      r.significant = r.chi.p_value < r.alpha;
    } catch (const stats::ZeroMarginal& e) {
      r.note = e.what();
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace confadapt::controller
