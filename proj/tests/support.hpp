#pragma once

#include <array>
#include <string>

#include "confadapt/core.hpp"

namespace confadapt::fixtures {

inline PhaseObservation observation(Phase p, double confusion = 0.5, double others = 0.5) {
  PhaseObservation o;
  o.phase = p;
  o.avg_emotions = EmotionVector::filled(others);
  o.avg_emotions[Emotion::Confusion] = confusion;
  o.max_emotions = EmotionVector::filled(1.0);
  o.gaze = {0.4, 0.4, 0.2};
  return o;
}

// Confusion averages are given per phase in order Pre, Failure, Explanation, Resolution.
inline FailureEpisode episode(std::string pid, int round, int object, Action a, ExplanationLevel level,
                              std::array<double, 4> lc = {0.1, 0.1, 0.1, 0.1}) {
  FailureEpisode ep;
  ep.participant_id = std::move(pid);
  ep.round = round;
  ep.object_index = object;
  ep.action = a;
  ep.delivered_level = level;
  for (std::size_t i = 0; i < kPhases.size(); ++i) ep.observations[kPhases[i]] = observation(kPhases[i], lc[i]);
  return ep;
}

}  // namespace confadapt::fixtures
