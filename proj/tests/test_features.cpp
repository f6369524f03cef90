#include <gtest/gtest.h>

#include <set>

#include "confadapt/features.hpp"
#include "confadapt/labeler.hpp"
#include "confadapt/simulate.hpp"
#include "support.hpp"

using namespace confadapt;
using namespace confadapt::features;
using confadapt::fixtures::episode;
using confadapt::fixtures::observation;

TEST(PhaseBlock, ZeroObservation) {
  PhaseObservation o;
  o.gaze = {1, 0, 0};
  const auto b = phase_block(o);
  for (std::size_t i = 0; i < 22; ++i) EXPECT_EQ(b[i], 0.0) << i;
  EXPECT_EQ(b[22], 1.0);
  EXPECT_EQ(b[23], 0.0);
  EXPECT_EQ(b[24], 0.0);
  EXPECT_EQ(b[25], 0.0);
  EXPECT_EQ(b[26], 0.0);
}

TEST(PhaseBlock, ConfusionIsFirstSlot) {
  PhaseObservation o;
  o.avg_emotions[Emotion::Confusion] = 0.3;
  EXPECT_EQ(phase_block(o)[0], 0.3);
}

TEST(PhaseBlock, GesturesAreLastSlots) {
  PhaseObservation o;
  o.gestures = {true, true};
  const auto b = phase_block(o);
  EXPECT_EQ(b[25], 1.0);
  EXPECT_EQ(b[26], 1.0);
}

TEST(Layout, SlotNamesAreUniqueAndComplete) {
  const auto& names = slot_names();
  ASSERT_EQ(names.size(), kSlotCount);
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), kSlotCount);
  EXPECT_EQ(names[kDecreaseSlot], "decrease");
  EXPECT_EQ(names[0], "action_Pick");
  EXPECT_EQ(names[kLastExplanationOffset], "last_explanation_avg_Confusion");
}

TEST(Extract, DecreaseFlag) {
  auto last = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  auto cur = episode("P01", 2, 1, Action::Pick, ExplanationLevel::Low);
  EXPECT_EQ(extract_features(cur, last, ExplanationLevel::Low)[kDecreaseSlot], 1.0);
  EXPECT_EQ(extract_features(cur, last, ExplanationLevel::High)[kDecreaseSlot], 0.0);
}

TEST(Extract, LastChangeIsResolutionMinusExplanation) {
  auto last = episode("P01", 1, 1, Action::Carry, ExplanationLevel::High, {0.1, 0.1, 0.2, 0.1});
  auto cur = episode("P01", 2, 1, Action::Carry, ExplanationLevel::High);
  const auto fv = extract_features(cur, last, ExplanationLevel::High);
  EXPECT_NEAR(fv[kLastChangeOffset], -0.1, 1e-15);
  EXPECT_EQ(fv[kActionOffset + 1], 1.0);
  EXPECT_EQ(fv[kActionOffset], 0.0);
}

TEST(Extract, CurrentFailureBlockAndChange) {
  auto last = episode("P01", 1, 1, Action::Place, ExplanationLevel::High);
  auto cur = episode("P01", 1, 3, Action::Place, ExplanationLevel::High, {0.2, 0.6, 0.1, 0.1});
  const auto fv = extract_features(cur, last, ExplanationLevel::High);
  EXPECT_EQ(fv[kFailureOffset], 0.6);
  EXPECT_NEAR(fv[kFailureChangeOffset], 0.4, 1e-15);
  EXPECT_EQ(fv[kFailureOffset + 22], 0.4);  // gaze robot
}

TEST(Extract, UsesOnlyPastBehaviourFromHistory) {
  auto last = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  auto cur = episode("P01", 2, 1, Action::Pick, ExplanationLevel::High);
  const auto base = extract_features(cur, last, ExplanationLevel::High);
  // Current explanation and resolution phases are not observable at decision time.
  cur.observations[Phase::Explanation] = observation(Phase::Explanation, 0.9);
  cur.observations[Phase::Resolution] = observation(Phase::Resolution, 0.9);
  EXPECT_EQ(extract_features(cur, last, ExplanationLevel::High), base);
}

TEST(Extract, RejectsBadHistory) {
  auto cur = episode("P01", 2, 1, Action::Pick, ExplanationLevel::High);
  EXPECT_THROW(extract_features(cur, episode("P02", 1, 1, Action::Pick, ExplanationLevel::High),
                                ExplanationLevel::High),
               InvalidArgument);
  EXPECT_THROW(extract_features(cur, episode("P01", 1, 1, Action::Carry, ExplanationLevel::High),
                                ExplanationLevel::High),
               InvalidArgument);
  EXPECT_THROW(extract_features(cur, episode("P01", 3, 1, Action::Pick, ExplanationLevel::High),
                                ExplanationLevel::High),
               InvalidArgument);
}

TEST(TrainingSet, HistoryRequired) {
  Dataset d;
  d.episodes.push_back(episode("P01", 1, 1, Action::Pick, ExplanationLevel::High));
  d.episodes.push_back(episode("P01", 1, 2, Action::Carry, ExplanationLevel::High));
  d.episodes.push_back(episode("P01", 2, 1, Action::Pick, ExplanationLevel::Low));
  const auto labels = labeler::label_dataset(d);
  const auto ts = build_training_set(d, labels);
  ASSERT_EQ(ts.rows.size(), 1u);
  EXPECT_EQ(ts.rows[0].key.round, 2);
  EXPECT_EQ(ts.rows[0].x[kDecreaseSlot], 1.0);
  EXPECT_EQ(ts.skipped_without_history, 2u);
}

TEST(TrainingSet, HistoryFollowsStudyOrderNotFileOrder) {
  Dataset d;
  d.episodes.push_back(episode("P01", 3, 1, Action::Pick, ExplanationLevel::Low));
  d.episodes.push_back(episode("P01", 1, 1, Action::Pick, ExplanationLevel::High));
  d.episodes.push_back(episode("P01", 2, 1, Action::Pick, ExplanationLevel::Medium));
  const auto prev = previous_same_action(d);
  EXPECT_EQ(prev[0], 2);
  EXPECT_EQ(prev[1], -1);
  EXPECT_EQ(prev[2], 1);
}

TEST(TrainingSet, LabelCountMismatchThrows) {
  Dataset d;
  d.episodes.push_back(episode("P01", 1, 1, Action::Pick, ExplanationLevel::High));
  EXPECT_THROW(build_training_set(d, {}), InvalidArgument);
}

TEST(TrainingSet, DefaultStudyHas440Rows) {
  const auto study = simulate::simulate_study({});
  const auto ts = build_training_set(study.dataset, labeler::label_dataset(study.dataset));
  EXPECT_EQ(ts.rows.size(), 440u);
  EXPECT_EQ(ts.skipped_without_history, 165u);
}
