#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "confadapt/simulate.hpp"
#include "confadapt/stats.hpp"
#include "support.hpp"

using namespace confadapt;
using namespace confadapt::stats;

namespace {

// P(X > s) for one degree of freedom, integrating the density with x = u^2 so
// the singularity at zero disappears: density dx becomes 2/sqrt(2 pi) e^{-u^2/2} du.
double chi2_tail_by_integration(double s) {
  const double a = std::sqrt(s), b = 40.0;
  const int n = 200000;
  const double h = (b - a) / n;
  auto f = [](double u) { return 2.0 / std::sqrt(2.0 * std::numbers::pi) * std::exp(-u * u / 2.0); };
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST(Metrics, Examples) {
  auto perfect = classification_metrics(10, 0, 10, 0);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);

  auto none = classification_metrics(0, 0, 10, 10);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_TRUE(none.precision_degenerate);
  EXPECT_FALSE(none.recall_degenerate);

  auto half = classification_metrics(5, 5, 5, 5);
  EXPECT_EQ(half.accuracy, 0.5);
  EXPECT_EQ(half.precision, 0.5);
  EXPECT_EQ(half.recall, 0.5);
  EXPECT_EQ(half.f1, 0.5);
}

TEST(Metrics, MacroAndWeighted) {
  auto m = classification_metrics(2, 2, 6, 0);  // P_C 0.5, P_NC 1.0; support C 2, NC 8
  EXPECT_DOUBLE_EQ(m.macro_precision, 0.75);
  EXPECT_DOUBLE_EQ(m.weighted_precision, (0.5 * 2 + 1.0 * 8) / 10);
  EXPECT_THROW(classification_metrics(0, 0, 0, 0), InvalidArgument);
}

TEST(ChiSquare, IndependentTable) {
  auto r = chi_square_2x2({10, 10, 10, 10});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.dof, 1);
}

TEST(ChiSquare, CriticalValueAgainstIntegrationOracle) {
  const double oracle = chi2_tail_by_integration(3.841);
  EXPECT_NEAR(oracle, 0.05, 5e-4);
  EXPECT_NEAR(chi2_sf_1dof(3.841), oracle, 1e-9);
  for (double s : {0.1, 1.0, 2.5, 6.63, 10.83, 20.0}) EXPECT_NEAR(chi2_sf_1dof(s), chi2_tail_by_integration(s), 1e-9);
}

TEST(ChiSquare, ClosedFormAgrees) {
  for (Table2x2 t : {Table2x2{50, 6, 40, 343}, Table2x2{1, 12, 89, 337}, Table2x2{3, 7, 11, 2}}) {
    const double direct = chi_square_2x2(t).statistic;
    EXPECT_NEAR(chi_square_closed_form(t), direct, 1e-9 * direct);
  }
}

TEST(ChiSquare, H1PaperTable) { EXPECT_LT(chi_square_2x2({50, 6, 40, 343}).p_value, 1e-5); }

TEST(ChiSquare, ExpectedCounts) {
  auto r = chi_square_2x2({10, 20, 30, 40});
  EXPECT_DOUBLE_EQ(r.expected[0][0], 30.0 * 40.0 / 100.0);
  EXPECT_DOUBLE_EQ(r.expected[1][1], 70.0 * 60.0 / 100.0);
}

TEST(ChiSquare, YatesShrinksStatistic) {
  const Table2x2 t{12, 5, 7, 14};
  EXPECT_LT(chi_square_2x2(t, true).statistic, chi_square_2x2(t).statistic);
}

TEST(ChiSquare, ZeroMarginalThrows) {
  EXPECT_THROW(chi_square_2x2({0, 0, 5, 5}), ZeroMarginal);
  EXPECT_THROW(chi_square_2x2({0, 5, 0, 5}), ZeroMarginal);
  EXPECT_THROW(chi_square_goodness_of_fit({0, 0, 5, 5}), ZeroMarginal);
}

TEST(ChiSquare, GoodnessOfFitUsesPooledRate) {
  // Group 10 of 20 confused, pooled rate 0.25: (10-5)^2/5 + (10-15)^2/15.
  auto r = chi_square_goodness_of_fit({10, 10, 10, 50});
  EXPECT_DOUBLE_EQ(r.statistic, 5.0 + 25.0 / 15.0);
}

namespace {

std::vector<labeler::KeyedLabel> labels_for(const Dataset& d, std::vector<bool> confused) {
  std::vector<labeler::KeyedLabel> out;
  for (std::size_t i = 0; i < d.episodes.size(); ++i)
    out.push_back({d.episodes[i].key(), confused[i] ? ConfusionLabel{ConfusionState::Confused,
                                                                     ConfusionRule::HighConfusion}
                                                    : ConfusionLabel{}});
  return out;
}

}  // namespace

TEST(Breakdown, AllNotConfused) {
  Dataset d;
  for (int o = 1; o <= 3; ++o)
    d.episodes.push_back(fixtures::episode("P01", 1, o, kActions[o - 1], ExplanationLevel::High));
  for (const auto& r : confusion_breakdown(d, labels_for(d, {false, false, false}), GroupBy::Action))
    EXPECT_EQ(r.confused_pct, 0.0);
}

TEST(Breakdown, OneOfFour) {
  Dataset d;
  for (int o = 1; o <= 4; ++o) d.episodes.push_back(fixtures::episode("P01", 1, o, Action::Pick, ExplanationLevel::High));
  auto rows = confusion_breakdown(d, labels_for(d, {false, true, false, false}), GroupBy::Action);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].group, "Pick");
  EXPECT_EQ(rows[0].n, 4u);
  EXPECT_DOUBLE_EQ(rows[0].confused_pct, 25.0);
  EXPECT_DOUBLE_EQ(rows[0].not_confused_pct, 75.0);
}

TEST(Breakdown, RoundFilterAndMissingStrategy) {
  Dataset d;
  d.episodes.push_back(fixtures::episode("P01", 1, 1, Action::Pick, ExplanationLevel::High));
  d.episodes.push_back(fixtures::episode("P01", 2, 1, Action::Pick, ExplanationLevel::High));
  auto labels = labels_for(d, {true, false});
  auto r1 = confusion_breakdown(d, labels, GroupBy::Strategy, 1);
  ASSERT_EQ(r1.size(), 1u);
  EXPECT_EQ(r1[0].group, "none");
  EXPECT_EQ(r1[0].n, 1u);
  EXPECT_EQ(r1[0].n_confused, 1u);
  EXPECT_EQ(confusion_breakdown(d, labels, GroupBy::Round).size(), 2u);
  EXPECT_FALSE(parse_group_by("Action"));
}

TEST(Breakdown, RoundOnePickIsEasiest) {
  int holds = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    simulate::StudyConfig c;
    c.seed = seed;
    const auto s = simulate::simulate_study(c);
    const auto rows = confusion_breakdown(s.dataset, labeler::label_dataset(s.dataset), GroupBy::Action, 1);
    ASSERT_EQ(rows.size(), 3u);
    holds += rows[0].confused_pct < rows[1].confused_pct && rows[0].confused_pct < rows[2].confused_pct;
  }
  EXPECT_EQ(holds, 5);
}
