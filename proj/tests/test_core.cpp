#include <gtest/gtest.h>

#include <algorithm>

#include "confadapt/core.hpp"
#include "support.hpp"

using namespace confadapt;
using confadapt::fixtures::episode;

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST(Core, ValidEpisodeHasNoViolations) {
  auto ep = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High, {0.5, 0.5, 0.5, 0.5});
  EXPECT_TRUE(validate_episode(ep).empty());
}

TEST(Core, MissingResolutionIsReported) {
  auto ep = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  ep.observations.erase(Phase::Resolution);
  EXPECT_TRUE(contains(validate_episode(ep), "missing phase Resolution"));
}

TEST(Core, GazeSumIsReported) {
  auto ep = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  ep.observations[Phase::Failure].gaze = {0.5, 0.5, 0.5};
  EXPECT_TRUE(contains(validate_episode(ep), "gaze sum 1.5 ≠ 1"));
}

TEST(Core, GazeSumToleratesRounding) {
  auto ep = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  ep.observations[Phase::Failure].gaze = {0.1, 0.2, 0.7 + 1e-9};
  EXPECT_TRUE(validate_episode(ep).empty());
}

TEST(Core, EmotionRangeAndMaxBelowAvg) {
  auto ep = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  ep.observations[Phase::Pre].avg_emotions[Emotion::Anger] = 1.5;
  ep.observations[Phase::Failure].max_emotions[Emotion::Doubt] = 0.1;
  const auto v = validate_episode(ep);
  EXPECT_TRUE(contains(v, "Pre avg Anger out of [0,1]: 1.5"));
  EXPECT_TRUE(contains(v, "Failure max Doubt below avg"));
}

TEST(Core, NanEmotionIsRejected) {
  auto ep = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  ep.observations[Phase::Explanation].avg_emotions[Emotion::Interest] = std::nan("");
  EXPECT_FALSE(validate_episode(ep).empty());
}

TEST(Core, IdentityRanges) {
  auto ep = episode("", 5, 0, Action::Pick, ExplanationLevel::High);
  const auto v = validate_episode(ep);
  EXPECT_TRUE(contains(v, "empty participant_id"));
  EXPECT_TRUE(contains(v, "round 5 outside 1..4"));
  EXPECT_TRUE(contains(v, "object_index 0 outside 1..4"));
}

TEST(Core, PhaseTagMismatch) {
  auto ep = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  ep.observations[Phase::Explanation].phase = Phase::Pre;
  EXPECT_TRUE(contains(validate_episode(ep), "Explanation observation tagged as Pre"));
}

TEST(Core, DuplicateKeysInDataset) {
  Dataset d;
  d.episodes.push_back(episode("P01", 1, 1, Action::Pick, ExplanationLevel::High));
  d.episodes.push_back(episode("P01", 1, 1, Action::Carry, ExplanationLevel::High));
  const auto v = validate_dataset(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("duplicate key P01/r1/o1"), std::string::npos);
}

TEST(Core, NamesRoundTripAndAreCaseSensitive) {
  for (Action a : kActions) EXPECT_EQ(parse_action(to_string(a)), a);
  for (ExplanationLevel l : kLevels) EXPECT_EQ(parse_level(to_string(l)), l);
  for (Strategy s : kStrategies) EXPECT_EQ(parse_strategy(to_string(s)), s);
  for (Phase p : kPhases) EXPECT_EQ(parse_phase(to_string(p)), p);
  EXPECT_FALSE(parse_action("pick"));
  EXPECT_FALSE(parse_level("high"));
}

TEST(Core, LevelRanks) {
  EXPECT_LT(rank(ExplanationLevel::Zero), rank(ExplanationLevel::Low));
  EXPECT_LT(rank(ExplanationLevel::Medium), rank(ExplanationLevel::High));
  for (int r = 0; r < 4; ++r) EXPECT_EQ(rank(level_from_rank(r)), r);
  EXPECT_THROW(level_from_rank(4), InvalidArgument);
  EXPECT_THROW(level_from_rank(-1), InvalidArgument);
}

TEST(Core, StrategySchedules) {
  using enum ExplanationLevel;
  EXPECT_EQ(schedule(Strategy::C1), (std::array{Low, Low, Low, Low}));
  EXPECT_EQ(schedule(Strategy::C3), (std::array{High, High, High, High}));
  EXPECT_EQ(schedule(Strategy::D1), (std::array{High, Medium, Low, Zero}));
  EXPECT_EQ(schedule(Strategy::D2), (std::array{High, Low, Low, Low}));
  // No schedule ever raises the level.
  for (Strategy s : kStrategies) {
    const auto sch = schedule(s);
    for (std::size_t i = 1; i < sch.size(); ++i) EXPECT_LE(rank(sch[i]), rank(sch[i - 1]));
  }
}

TEST(Core, AtThrowsForMissingPhase) {
  auto ep = episode("P01", 1, 1, Action::Pick, ExplanationLevel::High);
  ep.observations.erase(Phase::Pre);
  EXPECT_THROW(ep.at(Phase::Pre), InvalidArgument);
}

TEST(Core, EpisodeOrdering) {
  auto a = episode("P01", 1, 3, Action::Pick, ExplanationLevel::High);
  auto b = episode("P01", 2, 1, Action::Pick, ExplanationLevel::High);
  EXPECT_TRUE(a.precedes(b));
  EXPECT_FALSE(b.precedes(a));
  EXPECT_FALSE(a.precedes(a));
}
