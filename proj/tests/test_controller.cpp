#include <gtest/gtest.h>

#include "confadapt/controller.hpp"
#include "confadapt/simulate.hpp"
#include "support.hpp"

using namespace confadapt;
using namespace confadapt::controller;
using enum ExplanationLevel;

namespace {

constexpr auto C = ConfusionState::Confused;
constexpr auto NC = ConfusionState::NotConfused;

auto respond(ConfusionState with_decrease, ConfusionState without) {
  return [=](const features::FeatureVector& x) { return x[features::kDecreaseSlot] == 1.0 ? with_decrease : without; };
}

Dataset scheduled(Strategy s) {
  Dataset d;
  const auto levels = schedule(s);
  for (int r = 1; r <= 4; ++r)
    d.episodes.push_back(fixtures::episode("P01", r, 1, Action::Pick, levels[static_cast<std::size_t>(r - 1)]));
  return d;
}

}  // namespace

TEST(Decide, Examples) {
  auto d = decide(respond(NC, NC), {}, High, {});
  EXPECT_EQ(d.suggested, Suggestion::Decrease);
  EXPECT_EQ(d.new_level, Medium);
  EXPECT_EQ(d.calls.size(), 1u);

  d = decide(respond(C, C), {}, Medium, {});
  EXPECT_EQ(d.suggested, Suggestion::Increase);
  EXPECT_EQ(d.new_level, High);

  d = decide(respond(C, NC), {}, Medium, {});
  EXPECT_EQ(d.suggested, Suggestion::Same);
  EXPECT_EQ(d.new_level, Medium);
  ASSERT_EQ(d.calls.size(), 2u);
  EXPECT_TRUE(d.calls[0].decrease_flag);
  EXPECT_FALSE(d.calls[1].decrease_flag);

  d = decide(respond(NC, NC), {}, Low, {Low, High});
  EXPECT_EQ(d.suggested, Suggestion::Decrease);
  EXPECT_EQ(d.new_level, Low);
}

TEST(Decide, IncreaseClampsAtMax) {
  auto d = decide(respond(C, C), {}, High, {});
  EXPECT_EQ(d.suggested, Suggestion::Increase);
  EXPECT_EQ(d.new_level, High);
}

TEST(Decide, BothCallsShareBehaviourSlots) {
  features::FeatureVector basis;
  for (std::size_t i = 0; i < features::kSlotCount; ++i) basis[i] = 0.001 * double(i);
  std::vector<features::FeatureVector> seen;
  decide(
      [&](const features::FeatureVector& x) {
        seen.push_back(x);
        return C;
      },
      basis, Medium, {});
  ASSERT_EQ(seen.size(), 2u);
  for (std::size_t i = 0; i < features::kSlotCount; ++i) {
    if (i != features::kDecreaseSlot) {
      EXPECT_EQ(seen[0][i], seen[1][i]);
    }
  }
}

TEST(Decide, RejectsBadBounds) {
  EXPECT_THROW(decide(respond(C, C), {}, Medium, {High, Low}), InvalidArgument);
  EXPECT_THROW(decide(respond(C, C), {}, Zero, {Low, High}), InvalidArgument);
}

TEST(Categorize, Examples) {
  EXPECT_EQ(categorize(Suggestion::Decrease, Low, Medium), Outcome::DecreaseFollowed);
  EXPECT_EQ(categorize(Suggestion::Decrease, Medium, Medium), Outcome::DecreaseNotFollowed);
  EXPECT_EQ(categorize(Suggestion::Increase, Medium, Medium), Outcome::IncreaseNotFollowed);
  EXPECT_EQ(categorize(Suggestion::Increase, Low, Medium), Outcome::IncreaseNotFollowed);
  EXPECT_EQ(categorize(Suggestion::Increase, High, Medium), Outcome::IncreaseFollowed);
  EXPECT_EQ(categorize(Suggestion::Same, Medium, Medium), Outcome::SameFollowed);
  EXPECT_EQ(categorize(Suggestion::Same, Low, Medium), Outcome::SameNotFollowed);
}

TEST(Replay, AlwaysSafeToDecrease) {
  const auto d = scheduled(Strategy::D1);
  const auto labels = labeler::label_dataset(d);
  const auto r = replay(d, labels, [](const FailureEpisode&) { return respond(NC, NC); });
  ASSERT_EQ(r.records.size(), 3u);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.suggested, Suggestion::Decrease);
    EXPECT_TRUE(rec.outcome == Outcome::DecreaseFollowed || rec.outcome == Outcome::DecreaseNotFollowed);
  }
}

TEST(Replay, AlwaysConfusedMeansIncreaseNotFollowed) {
  for (Strategy s : kStrategies) {
    const auto d = scheduled(s);
    const auto r = replay(d, labeler::label_dataset(d), [](const FailureEpisode&) { return respond(C, C); });
    for (const auto& rec : r.records) EXPECT_EQ(rec.outcome, Outcome::IncreaseNotFollowed);
  }
}

TEST(Replay, CurrentLevelIsPreviousDelivered) {
  const auto d = scheduled(Strategy::D1);
  const auto r = replay(d, labeler::label_dataset(d), [](const FailureEpisode&) { return respond(C, NC); });
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[0].e_current, High);
  EXPECT_EQ(r.records[0].realized, Medium);
  EXPECT_EQ(r.records[0].outcome, Outcome::SameNotFollowed);
}

TEST(Replay, ZeroLevelWidensLowerBound) {
  Dataset d = scheduled(Strategy::D1);
  d.episodes.push_back(fixtures::episode("P01", 4, 2, Action::Pick, Zero));
  const auto r = replay(d, labeler::label_dataset(d), [](const FailureEpisode&) { return respond(C, NC); });
  EXPECT_EQ(r.records.back().e_current, Zero);
  EXPECT_EQ(r.records.back().outcome, Outcome::SameFollowed);
}

TEST(Replay, TotalsMatchRecords) {
  const auto study = simulate::simulate_study({});
  const auto labels = labeler::label_dataset(study.dataset);
  const auto r = replay(study.dataset, labels, [](const FailureEpisode& ep) {
    return respond(ep.round % 2 ? C : NC, NC);
  });
  std::size_t total = 0;
  for (auto o : kOutcomes) total += r.totals.total(o);
  EXPECT_EQ(total, r.records.size());
  EXPECT_EQ(r.records.size(), 440u);
}

TEST(Hypotheses, PaperCounts) {
  OutcomeTotals t;
  t.set(Outcome::IncreaseNotFollowed, 50, 6);
  t.set(Outcome::SameFollowed, 1, 12);
  t.set(Outcome::DecreaseFollowed, 2, 47);
  t.set(Outcome::DecreaseNotFollowed, 37, 284);
  const auto h = evaluate_hypotheses(t);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_TRUE(h[0].significant);
  EXPECT_LT(h[0].chi.p_value, 1e-5);
  EXPECT_FALSE(h[1].significant);
  EXPECT_TRUE(h[2].significant);
  EXPECT_LT(h[2].chi.p_value, 0.005);
  EXPECT_LT(h[2].group_rate, h[2].rest_rate);
}

TEST(Hypotheses, IdenticalRatesAreNotSignificant) {
  OutcomeTotals t;
  for (auto o : kOutcomes) t.set(o, 5, 20);
  for (const auto& h : evaluate_hypotheses(t)) {
    EXPECT_TRUE(h.evaluable);
    EXPECT_FALSE(h.significant);
    EXPECT_NEAR(h.chi.statistic, 0.0, 1e-12);
  }
}

TEST(Hypotheses, EmptyCategoryIsNotEvaluable) {
  OutcomeTotals t;
  t.set(Outcome::IncreaseNotFollowed, 10, 1);
  t.set(Outcome::DecreaseFollowed, 1, 10);
  const auto h = evaluate_hypotheses(t);
  EXPECT_FALSE(h[1].evaluable);
  EXPECT_EQ(h[1].note, "empty category");
  EXPECT_TRUE(h[0].evaluable);
}

TEST(Hypotheses, GoodnessOfFitMode) {
  OutcomeTotals t;
  t.set(Outcome::IncreaseNotFollowed, 50, 6);
  t.set(Outcome::DecreaseNotFollowed, 37, 284);
  const auto h = evaluate_hypotheses(t, TableMode::GoodnessOfFit);
  EXPECT_TRUE(h[0].significant);
}
