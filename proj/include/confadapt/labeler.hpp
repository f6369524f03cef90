#pragma once

#include <vector>

#include "confadapt/core.hpp"

namespace confadapt::labeler {

struct Thresholds {
  double t_high = 0.7;
  double t_change = 0.05;

  // 0 < t_change < t_high <= 1
  bool valid() const { return t_change > 0.0 && t_change < t_high && t_high <= 1.0; }
};

inline void require_valid(const Thresholds& th) {
  if (!th.valid())
    throw InvalidArgument("labeler thresholds must satisfy 0 < t_change < t_high <= 1 (t_high=" +
                          std::to_string(th.t_high) + ", t_change=" + std::to_string(th.t_change) + ")");
}

/// Confusion likelihood per phase, read from the phase averages.
struct Trajectory {
  double pre = 0.0;
  double failure = 0.0;
  double explanation = 0.0;
  double resolution = 0.0;

  bool operator==(const Trajectory&) const = default;
};

// Absorbs representation error in differences like 0.15 - 0.10, so an
// increase of exactly t_change counts as reaching it.
inline constexpr double kCompareSlack = 1e-12;

inline Trajectory extract_trajectory(const FailureEpisode& ep) {
  auto lc = [&](Phase p) { return ep.at(p).avg_emotions[Emotion::Confusion]; };
  return {lc(Phase::Pre), lc(Phase::Failure), lc(Phase::Explanation), lc(Phase::Resolution)};
}

inline bool high_confusion(const Trajectory& t, const Thresholds& th) { return t.resolution > th.t_high; }

namespace detail {
inline bool reaches(double delta, double t_change) { return delta >= t_change - kCompareSlack; }
}  // namespace detail

struct PersistentResult {
  bool fired = false;
  ConfusionRule rule = ConfusionRule::None;
};

/// Sub-rules evaluated in order a, b, c; the first that fires wins.
/// An increase is measured against the preceding phase, and "reduced"
/// compares the phase where the increase happened with resolution.
inline PersistentResult persistent_confusion(const Trajectory& t, const Thresholds& th) {
  using detail::reaches;
  if (reaches(t.explanation - t.failure, th.t_change) && !reaches(t.explanation - t.resolution, th.t_change))
    return {true, ConfusionRule::PersistentA};
  if (reaches(t.failure - t.pre, th.t_change) && !reaches(t.failure - t.resolution, th.t_change))
    return {true, ConfusionRule::PersistentB};
  if (reaches(t.resolution - t.explanation, th.t_change)) return {true, ConfusionRule::PersistentC};
  return {};
}

inline ConfusionLabel label_trajectory(const Trajectory& t, const Thresholds& th) {
  if (high_confusion(t, th)) return {ConfusionState::Confused, ConfusionRule::HighConfusion};
  if (auto p = persistent_confusion(t, th); p.fired) return {ConfusionState::Confused, p.rule};
  return {ConfusionState::NotConfused, ConfusionRule::None};
}

inline ConfusionLabel set_confusion(const FailureEpisode& ep, const Thresholds& th = {}) {
  return label_trajectory(extract_trajectory(ep), th);
}

struct KeyedLabel {
  EpisodeKey key;
  ConfusionLabel label;

  bool operator==(const KeyedLabel&) const = default;
};

inline std::vector<KeyedLabel> label_dataset(const Dataset& d, const Thresholds& th = {}) {
  require_valid(th);
  std::vector<KeyedLabel> out;
  out.reserve(d.episodes.size());
  for (const auto& ep : d.episodes) out.push_back({ep.key(), set_confusion(ep, th)});
  return out;
}

}  // namespace confadapt::labeler
