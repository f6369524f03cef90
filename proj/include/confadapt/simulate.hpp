#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "confadapt/core.hpp"
#include "confadapt/labeler.hpp"
#include "confadapt/rng.hpp"

namespace confadapt::simulate {

// Synthetic study generator with known ground truth. Confusion is drawn from
// a clamped linear model of action difficulty, participant propensity,
// explanation adequacy and familiarity; each confusion-likelihood trajectory
// is then built from one of the labeling rule patterns so the labeler can be
// checked against the draw.

struct ParticipantProfile {
  std::string participant_id;
  double confusion_propensity = 0.0;  // [0,1]
  double familiarity_gain = 0.0;      // [0,1], per repeated exposure
  double expressiveness = 1.0;        // (0,1], scales behavioural correlates
  Strategy strategy = Strategy::C1;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct StudyConfig {
  int n_participants = 55;
  std::vector<Strategy> strategies{kStrategies.begin(), kStrategies.end()};  // assigned round-robin
  std::vector<int> failures_per_round{3, 3, 3, 2};
  std::array<double, 3> difficulty{0.05, 0.30, 0.35};  // Pick, Carry, Place
  std::array<double, 4> adequacy{0.0, 0.4, 0.7, 0.9};  // Zero, Low, Medium, High
  double noise_sigma = 0.02;
  std::uint64_t seed = 20240501;

  Range propensity{0.25, 0.75};
  Range familiarity_gain{0.0, 0.08};
  Range expressiveness{0.5, 1.0};
  double signal_strength = 0.08;  // emotion offset when confused, before expressiveness

  double difficulty_of(Action a) const { return difficulty[static_cast<std::size_t>(a)]; }
  double adequacy_of(ExplanationLevel l) const { return adequacy[static_cast<std::size_t>(l)]; }
};

inline void validate(const StudyConfig& c) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  auto unit_range = [&](const Range& r) { return unit(r.lo) && unit(r.hi) && r.lo <= r.hi; };
  if (c.n_participants < 1) throw InvalidArgument("n_participants must be positive");
  if (c.strategies.empty()) throw InvalidArgument("at least one strategy is required");
  if (c.failures_per_round.empty() || c.failures_per_round.size() > 4)
    throw InvalidArgument("failures_per_round needs 1 to 4 rounds");
  int total = 0;
  for (int f : c.failures_per_round) {
    if (f < 0 || f > 4) throw InvalidArgument("each round holds 0 to 4 failures");
    total += f;
  }
  if (total < 3) throw InvalidArgument("the schedule needs at least 3 failures to cover every action");
  for (double d : c.difficulty)
    if (!unit(d)) throw InvalidArgument("action difficulty outside [0,1]");
  for (double a : c.adequacy)
    if (!unit(a)) throw InvalidArgument("level adequacy outside [0,1]");
  if (!(c.noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be non-negative");
  if (!unit_range(c.propensity) || !unit_range(c.familiarity_gain))
    throw InvalidArgument("profile ranges must lie in [0,1]");
  if (!(c.expressiveness.lo > 0.0) || !unit_range(c.expressiveness))
    throw InvalidArgument("expressiveness range must lie in (0,1]");
  if (!(c.signal_strength >= 0.0 && c.signal_strength <= 0.5)) throw InvalidArgument("signal_strength outside [0,0.5]");
}

// ============================================================================
// Ground truth
// ============================================================================

inline double confusion_probability(const ParticipantProfile& p, Action action, ExplanationLevel level,
                                    int exposure_count, const StudyConfig& c) {
  const double raw = c.difficulty_of(action) + p.confusion_propensity - c.adequacy_of(level) -
                     p.familiarity_gain * static_cast<double>(exposure_count);
  return std::clamp(raw, 0.0, 1.0);
}

inline bool ground_truth_confusion(const ParticipantProfile& p, Action action, ExplanationLevel level,
                                   int exposure_count, Rng& rng, const StudyConfig& c = {}) {
  return rng.bernoulli(confusion_probability(p, action, level, exposure_count, c));
}

// ============================================================================
// Trajectories
// ============================================================================

enum class Pattern : std::uint8_t {
  Settling,               // slow decline in every phase
  ProductiveExplanation,  // rise at explanation, resolved by resolution
  ProductiveFailure,      // rise at failure, resolved by resolution
  HighResolution,         // resolution spike above any high threshold
  PersistentExplanation,  // rise at explanation that never comes down
  PersistentFailure,      // rise at failure that never comes down
  ResolutionRise,         // flat, then rises at resolution
};

inline constexpr std::array<Pattern, 3> kCalmPatterns{Pattern::Settling, Pattern::ProductiveExplanation,
                                                      Pattern::ProductiveFailure};
inline constexpr std::array<Pattern, 4> kConfusedPatterns{Pattern::HighResolution, Pattern::PersistentExplanation,
                                                          Pattern::PersistentFailure, Pattern::ResolutionRise};

/// Rule the labeler reports for the pattern at default thresholds and zero noise.
inline ConfusionRule intended_rule(Pattern p) {
  switch (p) {
    case Pattern::HighResolution: return ConfusionRule::HighConfusion;
    case Pattern::PersistentExplanation: return ConfusionRule::PersistentA;
    case Pattern::PersistentFailure: return ConfusionRule::PersistentB;
    case Pattern::ResolutionRise: return ConfusionRule::PersistentC;
    default: return ConfusionRule::None;
  }
}

// Step sizes keep every rule comparison at least 0.08 away from any change
// threshold in [0.03, 0.08], and resolution values of non-spiking patterns
// below 0.55.
inline constexpr double kRise = 0.20;
inline constexpr double kStep = 0.06;
inline constexpr double kHold = 0.05;

/// Noise-free trajectory for a pattern above baseline `b` (b in [0.05, 0.25]).
inline labeler::Trajectory pattern_trajectory(Pattern p, double b, double spike) {
  switch (p) {
    case Pattern::Settling: return {b + 3 * kStep, b + 2 * kStep, b + kStep, b};
    case Pattern::ProductiveExplanation: return {b + kStep, b, b + kRise, b};
    case Pattern::ProductiveFailure: return {b, b + kRise, b + kRise - kStep, b};
    case Pattern::HighResolution: return {b + kStep, b, b, spike};
    case Pattern::PersistentExplanation: return {b + kStep, b, b + kRise, b + kRise + kHold};
    case Pattern::PersistentFailure: return {b, b + kRise, b + kRise, b + kRise + kHold};
    case Pattern::ResolutionRise: return {b + kStep, b, b, b + kRise};
  }
  return {};
}

struct SynthesizedEpisode {
  Pattern pattern = Pattern::Settling;
  bool confused = false;
  labeler::Trajectory trajectory;  // after noise; equals the observations' Confusion averages
  std::map<Phase, PhaseObservation> observations;
};

namespace detail {

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline PhaseObservation observe(Phase phase, double lc, bool confused, double expressiveness, double strength,
                                double sigma, Rng& rng) {
  const bool reacting = confused && phase != Phase::Pre;
  const double amp = reacting ? strength * expressiveness : 0.0;

  PhaseObservation obs;
  obs.phase = phase;
  obs.avg_emotions[Emotion::Confusion] = lc;
  for (std::size_t i = 1; i < kEmotionCount; ++i) {
    const bool negative = i < kNegativeEmotionCount;
    const double base = negative ? rng.uniform(0.03, 0.12) : rng.uniform(0.20, 0.40);
    const double shift = amp * rng.uniform(0.6, 1.0);
    const double noise = sigma > 0 ? rng.normal(0.0, sigma) : 0.0;
    obs.avg_emotions[i] = clamp01(base + (negative ? shift : -shift) + noise);
  }
  for (std::size_t i = 0; i < kEmotionCount; ++i)
    obs.max_emotions[i] = std::min(1.0, obs.avg_emotions[i] + rng.uniform(0.02, 0.15));

  double robot = rng.uniform(0.25, 0.40);
  double misc = rng.uniform(0.05, 0.15) + (reacting ? 0.15 * expressiveness : 0.0);
  if (sigma > 0) {
    robot = clamp01(robot + rng.normal(0.0, sigma));
    misc = clamp01(misc + rng.normal(0.0, sigma));
  }
  obs.gaze = {robot, 1.0 - robot - misc, misc};

  const double gesture_p = 0.08 + (reacting ? 0.35 * expressiveness : 0.0);
  obs.gestures.hands_on_head_face = rng.bernoulli(gesture_p);
  obs.gestures.head_tilt = rng.bernoulli(gesture_p);
  return obs;
}

}  // namespace detail

/// Builds a full four-phase observation set whose confusion trajectory follows
/// a pattern drawn uniformly from the confused or calm families.
inline SynthesizedEpisode synthesize_trajectory(bool confused, Rng& rng, double noise_sigma,
                                                double expressiveness = 1.0, double signal_strength = 0.08) {
  SynthesizedEpisode out;
  out.confused = confused;
  out.pattern = confused ? kConfusedPatterns[rng.below(kConfusedPatterns.size())]
                         : kCalmPatterns[rng.below(kCalmPatterns.size())];
  const double base = rng.uniform(0.05, 0.25);
  const double spike = rng.uniform(0.88, 0.95);
  const auto clean = pattern_trajectory(out.pattern, base, spike);

  auto noisy = [&](double v) { return noise_sigma > 0 ? detail::clamp01(v + rng.normal(0.0, noise_sigma)) : v; };
  out.trajectory = {noisy(clean.pre), noisy(clean.failure), noisy(clean.explanation), noisy(clean.resolution)};

  const std::array<double, 4> lc{out.trajectory.pre, out.trajectory.failure, out.trajectory.explanation,
                                 out.trajectory.resolution};
  for (std::size_t i = 0; i < kPhases.size(); ++i)
    out.observations[kPhases[i]] =
        detail::observe(kPhases[i], lc[i], confused, expressiveness, signal_strength, noise_sigma, rng);
  return out;
}

// ============================================================================
// Study
// ============================================================================

struct TruthRecord {
  EpisodeKey key;
  ConfusionLabel label;  // state drawn from the model; rule is the pattern's intended rule
  Pattern pattern = Pattern::Settling;
  double probability = 0.0;
  int exposure_count = 0;
};

struct SimulatedStudy {
  Dataset dataset;
  std::vector<TruthRecord> truth;
  std::vector<ParticipantProfile> profiles;

  std::vector<labeler::KeyedLabel> truth_labels() const {
    std::vector<labeler::KeyedLabel> out;
    out.reserve(truth.size());
    for (const auto& t : truth) out.push_back({t.key, t.label});
    return out;
  }
};

inline std::string participant_name(int index, int n_participants) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(n_participants).size());
  std::string digits = std::to_string(index + 1);
  return "P" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

namespace detail {

inline Rng participant_stream(std::uint64_t seed, int index) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(index), /*salt=*/0x7061727469ULL));
}

// Actions for one participant: the first three failures cover each action
// once in random order, the rest are drawn uniformly.
inline std::vector<Action> action_schedule(int total, Rng& rng) {
  std::vector<Action> first{kActions.begin(), kActions.end()};
  for (std::size_t i = first.size() - 1; i > 0; --i) std::swap(first[i], first[rng.below(i + 1)]);
  std::vector<Action> out;
  for (int i = 0; i < total; ++i)
    out.push_back(i < 3 ? first[static_cast<std::size_t>(i)] : kActions[rng.below(kActions.size())]);
  return out;
}

}  // namespace detail

inline ParticipantProfile sample_profile(int index, const StudyConfig& c, Rng& rng) {
  ParticipantProfile p;
  p.participant_id = participant_name(index, c.n_participants);
  p.confusion_propensity = rng.uniform(c.propensity.lo, c.propensity.hi);
  p.familiarity_gain = rng.uniform(c.familiarity_gain.lo, c.familiarity_gain.hi);
  p.expressiveness = rng.uniform(c.expressiveness.lo, c.expressiveness.hi);
  p.strategy = c.strategies[static_cast<std::size_t>(index) % c.strategies.size()];
  return p;
}

/// Each participant draws from its own stream keyed by (seed, index), so the
/// output does not depend on the order participants are generated in.
inline SimulatedStudy simulate_participant(int index, const StudyConfig& c) {
  Rng rng = detail::participant_stream(c.seed, index);
  SimulatedStudy out;
  const ParticipantProfile profile = sample_profile(index, c, rng);
  out.profiles.push_back(profile);

  int total = 0;
  for (int f : c.failures_per_round) total += f;
  const auto actions = detail::action_schedule(total, rng);
  const auto levels = schedule(profile.strategy);

  std::array<int, 3> exposures{};
  std::size_t k = 0;
  for (std::size_t r = 0; r < c.failures_per_round.size(); ++r) {
    for (int obj = 1; obj <= c.failures_per_round[r]; ++obj, ++k) {
      FailureEpisode ep;
      ep.participant_id = profile.participant_id;
      ep.round = static_cast<int>(r) + 1;
      ep.object_index = obj;
      ep.action = actions[k];
      ep.delivered_level = levels[r];
      ep.strategy_id = profile.strategy;

      int& exposure = exposures[static_cast<std::size_t>(ep.action)];
      const double prob = confusion_probability(profile, ep.action, ep.delivered_level, exposure, c);
      const bool confused = rng.bernoulli(prob);
      auto synth = synthesize_trajectory(confused, rng, c.noise_sigma, profile.expressiveness, c.signal_strength);
      ep.observations = std::move(synth.observations);

      out.truth.push_back({ep.key(),
                           {confused ? ConfusionState::Confused : ConfusionState::NotConfused,
                            intended_rule(synth.pattern)},
                           synth.pattern,
                           prob,
                           exposure});
      out.dataset.episodes.push_back(std::move(ep));
      ++exposure;
    }
  }
  return out;
}

inline SimulatedStudy simulate_study(const StudyConfig& c) {
  validate(c);
  SimulatedStudy out;
  for (int i = 0; i < c.n_participants; ++i) {
    auto part = simulate_participant(i, c);
    for (auto& e : part.dataset.episodes) out.dataset.episodes.push_back(std::move(e));
    for (auto& t : part.truth) out.truth.push_back(std::move(t));
    out.profiles.push_back(std::move(part.profiles.front()));
  }
  return out;
}

}  // namespace confadapt::simulate
