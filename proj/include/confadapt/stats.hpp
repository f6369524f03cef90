#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "confadapt/core.hpp"
#include "confadapt/labeler.hpp"

namespace confadapt::stats {

// ============================================================================
// Classification metrics
// ============================================================================

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }

  bool operator==(const ConfusionCounts&) const = default;
};

/// Metrics for the Confused class plus macro and support-weighted variants.
/// A ratio with a zero denominator is reported as 0 and flagged degenerate.
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;

  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_f1 = 0.0;
};

namespace detail {
inline double ratio(double num, double den, bool& degenerate) {
  degenerate = den == 0.0;
  return degenerate ? 0.0 : num / den;
}
}  // namespace detail

inline Metrics classification_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw InvalidArgument("classification metrics need at least one counted prediction");
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  const double n = tp + fp + tn + fn;

  Metrics m;
  m.accuracy = (tp + tn) / n;
  m.precision = detail::ratio(tp, tp + fp, m.precision_degenerate);
  m.recall = detail::ratio(tp, tp + fn, m.recall_degenerate);
  m.f1 = detail::ratio(2 * tp, 2 * tp + fp + fn, m.f1_degenerate);

  bool unused = false;
  const double precision_nc = detail::ratio(tn, tn + fn, unused);
  const double recall_nc = detail::ratio(tn, tn + fp, unused);
  const double f1_nc = detail::ratio(2 * tn, 2 * tn + fn + fp, unused);

  m.macro_precision = (m.precision + precision_nc) / 2;
  m.macro_recall = (m.recall + recall_nc) / 2;
  m.macro_f1 = (m.f1 + f1_nc) / 2;
  const double support_c = tp + fn, support_nc = tn + fp;
  m.weighted_precision = (m.precision * support_c + precision_nc * support_nc) / n;
  m.weighted_f1 = (m.f1 * support_c + f1_nc * support_nc) / n;
  return m;
}

inline Metrics classification_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  return classification_metrics(ConfusionCounts{tp, fp, tn, fn});
}

// ============================================================================
// Chi-square
// ============================================================================

/// Rows: [in group, rest]. Columns: [Confused, NotConfused].
struct Table2x2 {
  std::uint64_t a = 0, b = 0;
  std::uint64_t c = 0, d = 0;

  std::uint64_t total() const { return a + b + c + d; }
  bool operator==(const Table2x2&) const = default;
};

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 1;
  std::array<std::array<double, 2>, 2> expected{};
};

struct ZeroMarginal : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

/// Upper tail of the chi-square distribution with one degree of freedom.
inline double chi2_sf_1dof(double statistic) {
  if (statistic <= 0.0) return 1.0;
  return std::erfc(std::sqrt(statistic / 2.0));
}

inline ChiSquareResult chi_square_2x2(const Table2x2& t, bool yates = false) {
  const double n = static_cast<double>(t.total());
  const std::array<std::array<double, 2>, 2> obs{{{double(t.a), double(t.b)}, {double(t.c), double(t.d)}}};
  const std::array<double, 2> rows{obs[0][0] + obs[0][1], obs[1][0] + obs[1][1]};
  const std::array<double, 2> cols{obs[0][0] + obs[1][0], obs[0][1] + obs[1][1]};
  if (n == 0 || rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0)
    throw ZeroMarginal("chi-square table has a zero marginal");

  ChiSquareResult r;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = rows[i] * cols[j] / n;
      r.expected[i][j] = e;
      double dev = std::abs(obs[i][j] - e);
      if (yates) dev = std::max(0.0, dev - 0.5);
      r.statistic += dev * dev / e;
    }
  }
  r.p_value = chi2_sf_1dof(r.statistic);
  return r;
}

/// N(ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)); equals the uncorrected statistic.
inline double chi_square_closed_form(const Table2x2& t) {
  const double a = double(t.a), b = double(t.b), c = double(t.c), d = double(t.d);
  const double n = a + b + c + d;
  const double diff = a * d - b * c;
  return n * diff * diff / ((a + b) * (c + d) * (a + c) * (b + d));
}

/// Group row tested against the pooled proportions of the whole table.
inline ChiSquareResult chi_square_goodness_of_fit(const Table2x2& t) {
  const double n = static_cast<double>(t.total());
  const double group = double(t.a + t.b);
  const double p_c = double(t.a + t.c) / n;
  if (n == 0 || group == 0 || p_c == 0.0 || p_c == 1.0)
    throw ZeroMarginal("goodness-of-fit table has a zero marginal");
  ChiSquareResult r;
  r.expected[0] = {group * p_c, group * (1 - p_c)};
  r.expected[1] = {double(t.c + t.d) * p_c, double(t.c + t.d) * (1 - p_c)};
  const double oa = double(t.a), ob = double(t.b);
  r.statistic = (oa - r.expected[0][0]) * (oa - r.expected[0][0]) / r.expected[0][0] +
                (ob - r.expected[0][1]) * (ob - r.expected[0][1]) / r.expected[0][1];
  r.p_value = chi2_sf_1dof(r.statistic);
  return r;
}

// ============================================================================
// Confusion breakdown
// ============================================================================

enum class GroupBy { Action, Strategy, Participant, Round };

inline std::optional<GroupBy> parse_group_by(std::string_view s) {
  if (s == "action") return GroupBy::Action;
  if (s == "strategy") return GroupBy::Strategy;
  if (s == "participant") return GroupBy::Participant;
  if (s == "round") return GroupBy::Round;
  return std::nullopt;
}

struct BreakdownRow {
  std::string group;
  double confused_pct = 0.0;
  double not_confused_pct = 0.0;
  std::size_t n = 0;
  std::size_t n_confused = 0;
};

/// Confused share per group, groups in their natural order (enum order for
/// actions and strategies, numeric for rounds, lexicographic for ids).
inline std::vector<BreakdownRow> confusion_breakdown(const Dataset& d, const std::vector<labeler::KeyedLabel>& labels,
                                                     GroupBy by, std::optional<int> only_round = std::nullopt) {
  std::map<EpisodeKey, bool> confused;
  for (const auto& l : labels) confused[l.key] = l.label.confused();

  // (sort key, display name) -> (n, n_confused)
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> acc;
  for (const auto& ep : d.episodes) {
    if (only_round && ep.round != *only_round) continue;
    auto it = confused.find(ep.key());
    if (it == confused.end()) throw InvalidArgument("no label for episode " + to_string(ep.key()));
    std::pair<std::string, std::string> key;
    switch (by) {
      case GroupBy::Action:
        key = {std::to_string(static_cast<int>(ep.action)), std::string(to_string(ep.action))};
        break;
      case GroupBy::Strategy:
        key = ep.strategy_id ? std::pair{std::to_string(static_cast<int>(*ep.strategy_id)),
                                         std::string(to_string(*ep.strategy_id))}
                             : std::pair{std::string("~"), std::string("none")};
        break;
      case GroupBy::Participant: key = {ep.participant_id, ep.participant_id}; break;
      case GroupBy::Round: key = {std::to_string(ep.round), std::to_string(ep.round)}; break;
    }
    auto& [n, nc] = acc[key];
    ++n;
    if (it->second) ++nc;
  }

  std::vector<BreakdownRow> out;
  for (const auto& [key, counts] : acc) {
    BreakdownRow row;
    row.group = key.second;
    row.n = counts.first;
    row.n_confused = counts.second;
    row.confused_pct = 100.0 * double(row.n_confused) / double(row.n);
    row.not_confused_pct = 100.0 - row.confused_pct;
    out.push_back(row);
  }
  return out;
}

}  // namespace confadapt::stats
