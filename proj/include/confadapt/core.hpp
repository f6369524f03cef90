#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace confadapt {

// ============================================================================
// Errors
// ============================================================================

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when caller-supplied values break a documented precondition.
struct InvalidArgument : Error {
  using Error::Error;
};

// ============================================================================
// Enumerations
// ============================================================================

enum class Phase : std::uint8_t { Pre, Failure, Explanation, Resolution };

inline constexpr std::array<Phase, 4> kPhases{Phase::Pre, Phase::Failure, Phase::Explanation,
                                              Phase::Resolution};

enum class Action : std::uint8_t { Pick, Carry, Place };

inline constexpr std::array<Action, 3> kActions{Action::Pick, Action::Carry, Action::Place};

enum class ExplanationLevel : std::uint8_t { Zero, Low, Medium, High };

inline constexpr std::array<ExplanationLevel, 4> kLevels{ExplanationLevel::Zero, ExplanationLevel::Low,
                                                         ExplanationLevel::Medium, ExplanationLevel::High};

constexpr int rank(ExplanationLevel level) { return static_cast<int>(level); }

inline ExplanationLevel level_from_rank(int r) {
  if (r < 0 || r > 3) throw InvalidArgument("explanation level rank out of range: " + std::to_string(r));
  return static_cast<ExplanationLevel>(r);
}

// Explanation strategies: per-round level schedules.
enum class Strategy : std::uint8_t { C1, C2, C3, D1, D2 };

inline constexpr std::array<Strategy, 5> kStrategies{Strategy::C1, Strategy::C2, Strategy::C3, Strategy::D1,
                                                     Strategy::D2};

inline constexpr std::array<ExplanationLevel, 4> schedule(Strategy s) {
  using enum ExplanationLevel;
  switch (s) {
    case Strategy::C1: return {Low, Low, Low, Low};           // Fixed-Low
    case Strategy::C2: return {Medium, Medium, Medium, Medium};  // Fixed-Medium
    case Strategy::C3: return {High, High, High, High};       // Fixed-High
    case Strategy::D1: return {High, Medium, Low, Zero};      // Decay-Slow
    case Strategy::D2: return {High, Low, Low, Low};          // Decay-Rapid
  }
  return {};
}

// Emotion channels in their fixed storage order. 0..6 negative, 7..10 positive.
enum class Emotion : std::uint8_t {
  Confusion,
  Doubt,
  Disappointment,
  Anxiety,
  Anger,
  Distress,
  SurpriseNegative,
  Satisfaction,
  Interest,
  Contentment,
  Desire,
};

inline constexpr std::size_t kEmotionCount = 11;
inline constexpr std::size_t kNegativeEmotionCount = 7;

constexpr bool is_negative(Emotion e) { return static_cast<std::size_t>(e) < kNegativeEmotionCount; }

enum class ConfusionState : std::uint8_t { NotConfused, Confused };

enum class ConfusionRule : std::uint8_t { None, HighConfusion, PersistentA, PersistentB, PersistentC };

// ============================================================================
// Names
// ============================================================================

namespace detail {

template <typename E, std::size_t N>
std::optional<E> lookup(std::string_view text, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [value, name] : table)
    if (name == text) return value;
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(E value, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [v, name] : table)
    if (v == value) return name;
  return "?";
}

inline constexpr std::array<std::pair<Phase, std::string_view>, 4> kPhaseNames{{
    {Phase::Pre, "Pre"},
    {Phase::Failure, "Failure"},
    {Phase::Explanation, "Explanation"},
    {Phase::Resolution, "Resolution"},
}};

inline constexpr std::array<std::pair<Action, std::string_view>, 3> kActionNames{{
    {Action::Pick, "Pick"},
    {Action::Carry, "Carry"},
    {Action::Place, "Place"},
}};

inline constexpr std::array<std::pair<ExplanationLevel, std::string_view>, 4> kLevelNames{{
    {ExplanationLevel::Zero, "Zero"},
    {ExplanationLevel::Low, "Low"},
    {ExplanationLevel::Medium, "Medium"},
    {ExplanationLevel::High, "High"},
}};

inline constexpr std::array<std::pair<Strategy, std::string_view>, 5> kStrategyNames{{
    {Strategy::C1, "C1"},
    {Strategy::C2, "C2"},
    {Strategy::C3, "C3"},
    {Strategy::D1, "D1"},
    {Strategy::D2, "D2"},
}};

inline constexpr std::array<std::pair<ConfusionState, std::string_view>, 2> kStateNames{{
    {ConfusionState::NotConfused, "NotConfused"},
    {ConfusionState::Confused, "Confused"},
}};

inline constexpr std::array<std::pair<ConfusionRule, std::string_view>, 5> kRuleNames{{
    {ConfusionRule::None, "None"},
    {ConfusionRule::HighConfusion, "HighConfusion"},
    {ConfusionRule::PersistentA, "PersistentA"},
    {ConfusionRule::PersistentB, "PersistentB"},
    {ConfusionRule::PersistentC, "PersistentC"},
}};

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames{
    "Confusion", "Doubt",        "Disappointment", "Anxiety",     "Anger",  "Distress",
    "SurpriseNegative", "Satisfaction", "Interest", "Contentment", "Desire",
};

}  // namespace detail

inline std::string_view to_string(Phase v) { return detail::name_of(v, detail::kPhaseNames); }
inline std::string_view to_string(Action v) { return detail::name_of(v, detail::kActionNames); }
inline std::string_view to_string(ExplanationLevel v) { return detail::name_of(v, detail::kLevelNames); }
inline std::string_view to_string(Strategy v) { return detail::name_of(v, detail::kStrategyNames); }
inline std::string_view to_string(ConfusionState v) { return detail::name_of(v, detail::kStateNames); }
inline std::string_view to_string(ConfusionRule v) { return detail::name_of(v, detail::kRuleNames); }
inline std::string_view to_string(Emotion v) { return detail::kEmotionNames[static_cast<std::size_t>(v)]; }

// Case-sensitive parsers; std::nullopt on unknown names.
inline std::optional<Phase> parse_phase(std::string_view s) { return detail::lookup(s, detail::kPhaseNames); }
inline std::optional<Action> parse_action(std::string_view s) { return detail::lookup(s, detail::kActionNames); }
inline std::optional<ExplanationLevel> parse_level(std::string_view s) {
  return detail::lookup(s, detail::kLevelNames);
}
inline std::optional<Strategy> parse_strategy(std::string_view s) {
  return detail::lookup(s, detail::kStrategyNames);
}
inline std::optional<ConfusionState> parse_state(std::string_view s) {
  return detail::lookup(s, detail::kStateNames);
}
inline std::optional<ConfusionRule> parse_rule(std::string_view s) { return detail::lookup(s, detail::kRuleNames); }

// ============================================================================
// Behaviour measures
// ============================================================================

/// Per-channel emotion likelihoods in [0,1], indexed in `Emotion` order.
struct EmotionVector {
  std::array<double, kEmotionCount> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](Emotion e) { return values[static_cast<std::size_t>(e)]; }
  double operator[](Emotion e) const { return values[static_cast<std::size_t>(e)]; }

  static EmotionVector filled(double v) {
    EmotionVector out;
    out.values.fill(v);
    return out;
  }

  bool operator==(const EmotionVector&) const = default;
};

/// Share of phase time spent looking at the robot, the task, and elsewhere.
struct GazeDistribution {
  double robot = 0.0;
  double task = 0.0;
  double misc = 0.0;

  double sum() const { return robot + task + misc; }
  bool operator==(const GazeDistribution&) const = default;
};

struct GestureFlags {
  bool hands_on_head_face = false;
  bool head_tilt = false;

  bool operator==(const GestureFlags&) const = default;
};

struct PhaseObservation {
  Phase phase = Phase::Pre;
  EmotionVector avg_emotions;
  EmotionVector max_emotions;
  GazeDistribution gaze;
  GestureFlags gestures;

  bool operator==(const PhaseObservation&) const = default;
};

/// Identifies an episode within a dataset.
struct EpisodeKey {
  std::string participant_id;
  int round = 0;
  int object_index = 0;

  auto operator<=>(const EpisodeKey&) const = default;
};

inline std::string to_string(const EpisodeKey& k) {
  return k.participant_id + "/r" + std::to_string(k.round) + "/o" + std::to_string(k.object_index);
}

/// One robot failure as experienced by one participant.
struct FailureEpisode {
  std::string participant_id;
  int round = 1;
  int object_index = 1;
  Action action = Action::Pick;
  ExplanationLevel delivered_level = ExplanationLevel::High;
  std::map<Phase, PhaseObservation> observations;
  std::optional<Strategy> strategy_id;

  EpisodeKey key() const { return {participant_id, round, object_index}; }

  const PhaseObservation& at(Phase p) const {
    auto it = observations.find(p);
    if (it == observations.end())
      throw InvalidArgument("episode " + to_string(key()) + " has no " + std::string(to_string(p)) + " phase");
    return it->second;
  }

  // True when this episode happens strictly before `other` in study order.
  bool precedes(const FailureEpisode& other) const {
    return std::tie(round, object_index) < std::tie(other.round, other.object_index);
  }

  bool operator==(const FailureEpisode&) const = default;
};

struct ConfusionLabel {
  ConfusionState state = ConfusionState::NotConfused;
  ConfusionRule rule = ConfusionRule::None;

  bool confused() const { return state == ConfusionState::Confused; }
  bool operator==(const ConfusionLabel&) const = default;
};

inline constexpr std::string_view kDatasetSchemaVersion = "1";

struct Dataset {
  std::vector<FailureEpisode> episodes;
  std::string schema_version{kDatasetSchemaVersion};

  bool operator==(const Dataset&) const = default;
};

// ============================================================================
// Validation
// ============================================================================

inline constexpr double kGazeSumTolerance = 1e-6;

namespace detail {

inline std::string fmt_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline void check_emotions(const EmotionVector& ev, std::string_view what, std::string_view phase,
                           std::vector<std::string>& out) {
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    const double v = ev[i];
    if (std::isnan(v) || v < 0.0 || v > 1.0)
      out.push_back(std::string(phase) + " " + std::string(what) + " " +
                    std::string(kEmotionNames[i]) + " out of [0,1]: " + fmt_number(v));
  }
}

}  // namespace detail

/// Every invariant violation in the episode. An empty result means valid.
inline std::vector<std::string> validate_episode(const FailureEpisode& ep) {
  std::vector<std::string> out;
  if (ep.participant_id.empty()) out.emplace_back("empty participant_id");
  if (ep.round < 1 || ep.round > 4) out.push_back("round " + std::to_string(ep.round) + " outside 1..4");
  if (ep.object_index < 1 || ep.object_index > 4)
    out.push_back("object_index " + std::to_string(ep.object_index) + " outside 1..4");

  for (Phase p : kPhases) {
    auto it = ep.observations.find(p);
    if (it == ep.observations.end()) {
      out.push_back("missing phase " + std::string(to_string(p)));
      continue;
    }
    const PhaseObservation& obs = it->second;
    const std::string name(to_string(p));
    if (obs.phase != p) out.push_back(name + " observation tagged as " + std::string(to_string(obs.phase)));
    detail::check_emotions(obs.avg_emotions, "avg", name, out);
    detail::check_emotions(obs.max_emotions, "max", name, out);
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
      if (obs.max_emotions[i] < obs.avg_emotions[i])
        out.push_back(name + " max " + std::string(detail::kEmotionNames[i]) + " below avg");
    }
    const auto& g = obs.gaze;
    for (double f : {g.robot, g.task, g.misc}) {
      if (std::isnan(f) || f < 0.0 || f > 1.0) {
        out.push_back(name + " gaze fraction out of [0,1]: " + detail::fmt_number(f));
        break;
      }
    }
    const double sum = g.sum();
    if (!(std::abs(sum - 1.0) <= kGazeSumTolerance))
      out.push_back("gaze sum " + detail::fmt_number(sum) + " ≠ 1");
  }
  return out;
}

/// Per-episode violations plus key uniqueness across the dataset.
inline std::vector<std::string> validate_dataset(const Dataset& d) {
  std::vector<std::string> out;
  std::map<EpisodeKey, std::size_t> seen;
  for (std::size_t i = 0; i < d.episodes.size(); ++i) {
    const auto& ep = d.episodes[i];
    for (auto& v : validate_episode(ep)) out.push_back("episode " + std::to_string(i + 1) + ": " + v);
    auto [it, inserted] = seen.emplace(ep.key(), i);
    if (!inserted)
      out.push_back("episode " + std::to_string(i + 1) + ": duplicate key " + to_string(ep.key()) +
                    " (first at episode " + std::to_string(it->second + 1) + ")");
  }
  return out;
}

}  // namespace confadapt
