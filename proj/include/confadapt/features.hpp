#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confadapt/core.hpp"
#include "confadapt/labeler.hpp"

namespace confadapt::features {

inline constexpr std::string_view kLayoutVersion = "FV1";

inline constexpr std::size_t kPhaseBlockSize = 2 * kEmotionCount + 3 + 2;  // 27
inline constexpr std::size_t kChangeBlockSize = kEmotionCount;            // 11

// Slot offsets of the FV1 layout.
inline constexpr std::size_t kActionOffset = 0;
inline constexpr std::size_t kDecreaseSlot = 3;
inline constexpr std::size_t kLastExplanationOffset = 4;
inline constexpr std::size_t kLastResolutionOffset = kLastExplanationOffset + kPhaseBlockSize;
inline constexpr std::size_t kLastChangeOffset = kLastResolutionOffset + kPhaseBlockSize;
inline constexpr std::size_t kFailureOffset = kLastChangeOffset + kChangeBlockSize;
inline constexpr std::size_t kFailureChangeOffset = kFailureOffset + kPhaseBlockSize;
inline constexpr std::size_t kSlotCount = kFailureChangeOffset + kChangeBlockSize;

static_assert(kSlotCount == 107);

using PhaseBlock = std::array<double, kPhaseBlockSize>;

struct FeatureVector {
  std::array<double, kSlotCount> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> span() const { return values; }

  bool operator==(const FeatureVector&) const = default;
};

// avg emotions, max emotions, gaze robot/task/misc, gestures hands/tilt.
inline PhaseBlock phase_block(const PhaseObservation& obs) {
  PhaseBlock b{};
  std::size_t i = 0;
  for (double v : obs.avg_emotions.values) b[i++] = v;
  for (double v : obs.max_emotions.values) b[i++] = v;
  b[i++] = obs.gaze.robot;
  b[i++] = obs.gaze.task;
  b[i++] = obs.gaze.misc;
  b[i++] = obs.gestures.hands_on_head_face ? 1.0 : 0.0;
  b[i++] = obs.gestures.head_tilt ? 1.0 : 0.0;
  return b;
}

namespace detail {

inline std::vector<std::string> block_names(std::string_view prefix) {
  std::vector<std::string> out;
  for (auto e : confadapt::detail::kEmotionNames) out.push_back(std::string(prefix) + "_avg_" + std::string(e));
  for (auto e : confadapt::detail::kEmotionNames) out.push_back(std::string(prefix) + "_max_" + std::string(e));
  for (auto g : {"gaze_robot", "gaze_task", "gaze_misc", "hands_on_head_face", "head_tilt"})
    out.push_back(std::string(prefix) + "_" + g);
  return out;
}

inline std::vector<std::string> change_names(std::string_view prefix) {
  std::vector<std::string> out;
  for (auto e : confadapt::detail::kEmotionNames) out.push_back(std::string(prefix) + "_change_" + std::string(e));
  return out;
}

}  // namespace detail

/// Column names of every slot, in layout order.
inline const std::vector<std::string>& slot_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"action_Pick", "action_Carry", "action_Place", "decrease"};
    for (auto& s : detail::block_names("last_explanation")) n.push_back(s);
    for (auto& s : detail::block_names("last_resolution")) n.push_back(s);
    for (auto& s : detail::change_names("last")) n.push_back(s);
    for (auto& s : detail::block_names("failure")) n.push_back(s);
    for (auto& s : detail::change_names("failure")) n.push_back(s);
    return n;
  }();
  return names;
}

inline void write_block(FeatureVector& fv, std::size_t offset, const PhaseBlock& b) {
  std::copy(b.begin(), b.end(), fv.values.begin() + static_cast<std::ptrdiff_t>(offset));
}

inline void write_change(FeatureVector& fv, std::size_t offset, const PhaseObservation& earlier,
                         const PhaseObservation& later) {
  for (std::size_t i = 0; i < kEmotionCount; ++i)
    fv[offset + i] = later.avg_emotions[i] - earlier.avg_emotions[i];
}

/// Features for `current`, given the participant's most recent earlier
/// failure on the same action and the level being considered for delivery.
inline FeatureVector extract_features(const FailureEpisode& current, const FailureEpisode& last_same_action,
                                      ExplanationLevel candidate_level) {
  if (current.participant_id != last_same_action.participant_id)
    throw InvalidArgument("history episode belongs to participant " + last_same_action.participant_id +
                          ", current is " + current.participant_id);
  if (current.action != last_same_action.action)
    throw InvalidArgument("history episode action " + std::string(to_string(last_same_action.action)) +
                          " differs from current action " + std::string(to_string(current.action)));
  if (!last_same_action.precedes(current))
    throw InvalidArgument("history episode " + to_string(last_same_action.key()) + " does not precede " +
                          to_string(current.key()));

  FeatureVector fv;
  fv[kActionOffset + static_cast<std::size_t>(current.action)] = 1.0;
  fv[kDecreaseSlot] = rank(candidate_level) < rank(last_same_action.delivered_level) ? 1.0 : 0.0;

  const auto& last_expl = last_same_action.at(Phase::Explanation);
  const auto& last_res = last_same_action.at(Phase::Resolution);
  write_block(fv, kLastExplanationOffset, phase_block(last_expl));
  write_block(fv, kLastResolutionOffset, phase_block(last_res));
  write_change(fv, kLastChangeOffset, last_expl, last_res);

  const auto& pre = current.at(Phase::Pre);
  const auto& fail = current.at(Phase::Failure);
  write_block(fv, kFailureOffset, phase_block(fail));
  write_change(fv, kFailureChangeOffset, pre, fail);
  return fv;
}

/// Index of each episode's most recent earlier same-action episode by the
/// same participant, or -1 when there is none.
inline std::vector<std::ptrdiff_t> previous_same_action(const Dataset& d) {
  std::vector<std::ptrdiff_t> prev(d.episodes.size(), -1);
  std::map<std::pair<std::string, Action>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < d.episodes.size(); ++i)
    groups[{d.episodes[i].participant_id, d.episodes[i].action}].push_back(i);
  for (auto& [_, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return d.episodes[a].precedes(d.episodes[b]); });
    for (std::size_t j = 1; j < idx.size(); ++j) prev[idx[j]] = static_cast<std::ptrdiff_t>(idx[j - 1]);
  }
  return prev;
}

struct TrainingRow {
  EpisodeKey key;
  FeatureVector x;
  ConfusionState y = ConfusionState::NotConfused;

  const std::string& participant_id() const { return key.participant_id; }
  bool operator==(const TrainingRow&) const = default;
};

struct TrainingSet {
  std::vector<TrainingRow> rows;
  std::size_t skipped_without_history = 0;
};

/// One row per episode that has same-action history, in dataset order. The
/// decrease flag reflects the level that was actually delivered.
inline TrainingSet build_training_set(const Dataset& d, const std::vector<labeler::KeyedLabel>& labels) {
  if (labels.size() != d.episodes.size())
    throw InvalidArgument("label count " + std::to_string(labels.size()) + " does not match episode count " +
                          std::to_string(d.episodes.size()));
  std::map<EpisodeKey, ConfusionState> by_key;
  for (const auto& l : labels) by_key[l.key] = l.label.state;

  TrainingSet out;
  const auto prev = previous_same_action(d);
  for (std::size_t i = 0; i < d.episodes.size(); ++i) {
    if (prev[i] < 0) {
      ++out.skipped_without_history;
      continue;
    }
    const auto& cur = d.episodes[i];
    auto it = by_key.find(cur.key());
    if (it == by_key.end()) throw InvalidArgument("no label for episode " + to_string(cur.key()));
    const auto& last = d.episodes[static_cast<std::size_t>(prev[i])];
    out.rows.push_back({cur.key(), extract_features(cur, last, cur.delivered_level), it->second});
  }
  return out;
}

}  // namespace confadapt::features
