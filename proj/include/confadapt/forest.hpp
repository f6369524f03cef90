#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "confadapt/core.hpp"
#include "confadapt/features.hpp"
#include "confadapt/rng.hpp"
#include "confadapt/stats.hpp"

namespace confadapt::forest {

struct ClassWeights {
  double confused = 1.0;
  double not_confused = 1.0;

  double of(ConfusionState s) const { return s == ConfusionState::Confused ? confused : not_confused; }
  bool operator==(const ClassWeights&) const = default;
};

/// Random-forest hyperparameters. Unset optionals are resolved against the
/// training rows: features_per_split to floor(sqrt(slots)), class weights to
/// inverse class frequency normalised so NotConfused weighs 1.
struct Params {
  int n_trees = 100;
  int max_depth = 10;
  int min_samples_split = 5;
  int min_samples_leaf = 10;
  std::optional<int> features_per_split;
  std::optional<ClassWeights> class_weights;
  bool bootstrap = true;
  double decision_threshold = 0.5;
  std::uint64_t seed = 0;

  bool operator==(const Params&) const = default;
};

struct Sample {
  std::vector<double> x;
  ConfusionState y = ConfusionState::NotConfused;
  std::string group;  // participant id
};

inline std::vector<Sample> to_samples(std::span<const features::TrainingRow> rows) {
  std::vector<Sample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({std::vector<double>(r.x.values.begin(), r.x.values.end()), r.y, r.participant_id()});
  return out;
}

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double prob_confused = 0.0;
  double weight_confused = 0.0;
  double weight_not_confused = 0.0;
  std::uint32_t n_samples = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const Node&) const = default;
};

/// Nodes in preorder; index 0 is the root. Rows with x[feature] <= threshold go left.
struct Tree {
  std::vector<Node> nodes;

  const Node& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const Node& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i];
  }

  double predict_proba(std::span<const double> x) const { return leaf_for(x).prob_confused; }

  int depth() const {
    int best = 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      const Node& n = nodes[static_cast<std::size_t>(i)];
      if (!n.is_leaf()) {
        stack.emplace_back(n.left, d + 1);
        stack.emplace_back(n.right, d + 1);
      }
    }
    return best;
  }

  bool operator==(const Tree&) const = default;
};

struct Model {
  Params params;  // resolved: every optional is set
  std::string feature_layout{features::kLayoutVersion};
  std::size_t n_features = features::kSlotCount;
  std::size_t n_training_rows = 0;
  std::size_t n_training_confused = 0;
  std::vector<Tree> trees;

  bool operator==(const Model&) const = default;
};

struct Prediction {
  ConfusionState cls = ConfusionState::NotConfused;
  double prob_confused = 0.0;
};

struct LayoutMismatch : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

// ============================================================================
// Impurity
// ============================================================================

/// 1 - sum p_k^2 with p_k proportional to weight_k * count_k.
inline double weighted_gini(double n_confused, double n_not_confused, const ClassWeights& w) {
  if (n_confused < 0 || n_not_confused < 0) throw InvalidArgument("class counts must be non-negative");
  const double c = w.confused * n_confused;
  const double nc = w.not_confused * n_not_confused;
  const double total = c + nc;
  if (total <= 0) throw InvalidArgument("weighted gini of an empty node");
  const double pc = c / total, pnc = nc / total;
  return 1.0 - pc * pc - pnc * pnc;
}

// ============================================================================
// Parameters
// ============================================================================

inline void validate(const Params& p) {
  if (p.n_trees < 1) throw InvalidArgument("n_trees must be positive");
  if (p.max_depth < 1) throw InvalidArgument("max_depth must be positive");
  if (p.min_samples_split < 1) throw InvalidArgument("min_samples_split must be positive");
  if (p.min_samples_leaf < 1) throw InvalidArgument("min_samples_leaf must be positive");
  if (p.features_per_split && *p.features_per_split < 1)
    throw InvalidArgument("features_per_split must be positive");
  if (p.class_weights && (!(p.class_weights->confused > 0) || !(p.class_weights->not_confused > 0)))
    throw InvalidArgument("class weights must be positive");
  if (!(p.decision_threshold >= 0.0 && p.decision_threshold <= 1.0))
    throw InvalidArgument("decision threshold must lie in [0,1]");
}

inline ClassWeights inverse_frequency_weights(std::span<const Sample> rows) {
  std::size_t c = 0;
  for (const auto& r : rows) c += r.y == ConfusionState::Confused;
  const std::size_t nc = rows.size() - c;
  if (c == 0 || nc == 0) return {};
  return {static_cast<double>(nc) / static_cast<double>(c), 1.0};
}

inline Params resolve(Params p, std::span<const Sample> rows) {
  validate(p);
  if (rows.empty()) throw InvalidArgument("cannot train on zero rows");
  const std::size_t n_features = rows.front().x.size();
  if (n_features == 0) throw InvalidArgument("rows have no features");
  for (const auto& r : rows)
    if (r.x.size() != n_features) throw InvalidArgument("rows have inconsistent feature counts");
  if (!p.features_per_split)
    p.features_per_split = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)))));
  p.features_per_split = std::min<int>(*p.features_per_split, static_cast<int>(n_features));
  if (!p.class_weights) p.class_weights = inverse_frequency_weights(rows);
  return p;
}

// ============================================================================
// Tree growth
// ============================================================================

namespace detail {

struct Grower {
  std::span<const Sample> rows;
  const Params& params;  // resolved
  Rng& rng;
  std::size_t n_features;
  Tree tree;

  std::vector<std::size_t> feature_pool;
  std::vector<std::pair<double, std::size_t>> sorted;  // (value, row)

  ClassWeights weights() const { return *params.class_weights; }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
  };

  Split best_split(const std::vector<std::size_t>& idx, double w_c, double w_nc, double impurity) {
    const ClassWeights w = weights();
    const auto k = static_cast<std::size_t>(*params.features_per_split);

    // Partial Fisher-Yates over all slots, then visit the chosen ones in
    // ascending order so equal gains resolve to the lowest slot.
    std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n_features - i));
      std::swap(feature_pool[i], feature_pool[j]);
    }
    std::vector<std::size_t> chosen(feature_pool.begin(), feature_pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());

    const auto n = idx.size();
    const auto min_leaf = static_cast<std::size_t>(params.min_samples_leaf);
    const double w_total = w_c + w_nc;

    Split best;
    for (std::size_t f : chosen) {
      sorted.clear();
      for (std::size_t r : idx) sorted.emplace_back(rows[r].x[f], r);
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });

      double lc = 0, lnc = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (rows[sorted[i].second].y == ConfusionState::Confused)
          lc += w.confused;
        else
          lnc += w.not_confused;
        const double v = sorted[i].first, next = sorted[i + 1].first;
        if (!(v < next)) continue;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf || n - n_left < min_leaf) continue;

        const double rc = w_c - lc, rnc = w_nc - lnc;
        const double wl = lc + lnc, wr = rc + rnc;
        const double gl = 1.0 - (lc / wl) * (lc / wl) - (lnc / wl) * (lnc / wl);
        const double gr = 1.0 - (rc / wr) * (rc / wr) - (rnc / wr) * (rnc / wr);
        const double gain = impurity - (wl / w_total) * gl - (wr / w_total) * gr;
        if (gain > best.gain) {
          double thr = v + (next - v) / 2.0;
          if (!(thr < next)) thr = v;
          best = {static_cast<int>(f), thr, gain};
        }
      }
    }
    return best;
  }

  int grow(const std::vector<std::size_t>& idx, int depth) {
    const ClassWeights w = weights();
    std::size_t n_c = 0;
    for (std::size_t r : idx) n_c += rows[r].y == ConfusionState::Confused;
    const double w_c = w.confused * static_cast<double>(n_c);
    const double w_nc = w.not_confused * static_cast<double>(idx.size() - n_c);

    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    {
      Node& node = tree.nodes.back();
      node.n_samples = static_cast<std::uint32_t>(idx.size());
      node.weight_confused = w_c;
      node.weight_not_confused = w_nc;
      node.prob_confused = w_c / (w_c + w_nc);
    }

    const double impurity = weighted_gini(static_cast<double>(n_c), static_cast<double>(idx.size() - n_c), w);
    const auto n = idx.size();
    if (depth >= params.max_depth || impurity <= 0.0 || n < static_cast<std::size_t>(params.min_samples_split) ||
        n < 2 * static_cast<std::size_t>(params.min_samples_leaf))
      return id;

    const Split split = best_split(idx, w_c, w_nc, impurity);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : idx)
      (rows[r].x[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(r);

    const int l = grow(left, depth + 1);
    const int rgt = grow(right, depth + 1);
    Node& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }
};

inline Tree grow_tree(std::span<const Sample> rows, const std::vector<std::size_t>& idx, const Params& resolved,
                      Rng& rng) {
  Grower g{rows, resolved, rng, rows.front().x.size(), {}, {}, {}};
  g.feature_pool.resize(g.n_features);
  g.sorted.reserve(idx.size());
  g.grow(idx, 0);
  return std::move(g.tree);
}

inline Rng tree_stream(std::uint64_t seed, std::size_t tree_index) {
  return Rng(derive_seed(seed, tree_index, /*salt=*/0x7472656573ULL));
}

}  // namespace detail

/// Greedy CART on every row (no resampling).
inline Tree train_tree(std::span<const Sample> rows, const Params& params, Rng& rng) {
  const Params p = resolve(params, rows);
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return detail::grow_tree(rows, idx, p, rng);
}

/// Each tree draws its bootstrap sample and split features from its own
/// stream, derived from (seed, tree index).
inline Model train_forest(std::span<const Sample> rows, const Params& params,
                          std::string_view feature_layout = features::kLayoutVersion) {
  Model m;
  m.params = resolve(params, rows);
  m.feature_layout = std::string(feature_layout);
  m.n_features = rows.front().x.size();
  m.n_training_rows = rows.size();
  for (const auto& r : rows) m.n_training_confused += r.y == ConfusionState::Confused;

  m.trees.reserve(static_cast<std::size_t>(m.params.n_trees));
  std::vector<std::size_t> idx(rows.size());
  for (int t = 0; t < m.params.n_trees; ++t) {
    Rng rng = detail::tree_stream(m.params.seed, static_cast<std::size_t>(t));
    if (m.params.bootstrap) {
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(rows.size()));
    } else {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    m.trees.push_back(detail::grow_tree(rows, idx, m.params, rng));
  }
  return m;
}

inline Prediction predict(const Model& m, std::span<const double> x) {
  if (x.size() != m.n_features)
    throw LayoutMismatch("input has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(m.n_features));
  double sum = 0.0;
  for (const auto& t : m.trees) sum += t.predict_proba(x);
  const double p = sum / static_cast<double>(m.trees.size());
  return {p >= m.params.decision_threshold ? ConfusionState::Confused : ConfusionState::NotConfused, p};
}

inline Prediction predict(const Model& m, const features::FeatureVector& x) {
  if (m.feature_layout != features::kLayoutVersion)
    throw LayoutMismatch("model layout " + m.feature_layout + " does not match " +
                         std::string(features::kLayoutVersion));
  return predict(m, x.span());
}

/// Structural violations of the model's own depth and leaf-size bounds.
/// A root that is itself a leaf is exempt from the leaf-size bound.
inline std::vector<std::string> audit(const Model& m) {
  std::vector<std::string> out;
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    const Tree& tree = m.trees[t];
    const std::string where = "tree " + std::to_string(t) + ": ";
    if (tree.nodes.empty()) {
      out.push_back(where + "no nodes");
      continue;
    }
    if (tree.depth() > m.params.max_depth)
      out.push_back(where + "depth " + std::to_string(tree.depth()) + " exceeds " + std::to_string(m.params.max_depth));
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const Node& n = tree.nodes[i];
      if (n.is_leaf()) {
        if (i != 0 && n.n_samples < static_cast<std::uint32_t>(m.params.min_samples_leaf))
          out.push_back(where + "leaf " + std::to_string(i) + " holds " + std::to_string(n.n_samples) + " rows");
      } else {
        const auto size = static_cast<int>(tree.nodes.size());
        if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= size || n.right >= size)
          out.push_back(where + "node " + std::to_string(i) + " has invalid children");
        if (static_cast<std::size_t>(n.feature) >= m.n_features)
          out.push_back(where + "node " + std::to_string(i) + " splits on unknown slot");
      }
    }
  }
  return out;
}

// ============================================================================
// Leave-one-participant-out cross-validation
// ============================================================================

struct Fold {
  std::string held_out;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// One fold per distinct group, in order of first appearance.
inline std::vector<Fold> lopo_folds(std::span<const Sample> rows) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> pos;
  for (const auto& r : rows)
    if (pos.emplace(r.group, order.size()).second) order.push_back(r.group);
  if (order.size() < 2) throw InvalidArgument("leave-one-participant-out needs at least 2 participants");

  std::vector<Fold> folds(order.size());
  for (std::size_t f = 0; f < order.size(); ++f) folds[f].held_out = order[f];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t g = pos.at(rows[i].group);
    for (std::size_t f = 0; f < folds.size(); ++f) (f == g ? folds[f].test : folds[f].train).push_back(i);
  }
  return folds;
}

struct FoldReport {
  std::string participant_id;
  stats::ConfusionCounts counts;
  stats::Metrics metrics;
  std::size_t n_train = 0;
};

/// Fold means. Accuracy averages every fold; the class-C ratios average
/// only folds where they are defined.
struct CvAggregate {
  std::size_t n_folds = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double macro_precision = 0.0;
  double weighted_precision = 0.0;
  std::size_t f1_folds = 0;
  stats::ConfusionCounts pooled;
  stats::Metrics pooled_metrics;
};

struct CvReport {
  std::vector<FoldReport> folds;
  CvAggregate aggregate;
  std::vector<Model> fold_models;  // filled only on request, aligned with folds
};

inline stats::ConfusionCounts count_predictions(const Model& m, std::span<const Sample> rows,
                                                std::span<const std::size_t> which) {
  stats::ConfusionCounts c;
  for (std::size_t i : which) {
    const bool truth = rows[i].y == ConfusionState::Confused;
    const bool pred = predict(m, rows[i].x).cls == ConfusionState::Confused;
    if (truth && pred) ++c.tp;
    else if (!truth && pred) ++c.fp;
    else if (!truth && !pred) ++c.tn;
    else ++c.fn;
  }
  return c;
}

inline FoldReport fold_report(std::string participant, const stats::ConfusionCounts& c, std::size_t n_train) {
  return {std::move(participant), c, stats::classification_metrics(c), n_train};
}

inline CvAggregate aggregate(const std::vector<FoldReport>& folds) {
  CvAggregate a;
  a.n_folds = folds.size();
  std::size_t np = 0, nr = 0;
  for (const auto& f : folds) {
    a.accuracy += f.metrics.accuracy;
    a.macro_precision += f.metrics.macro_precision;
    a.weighted_precision += f.metrics.weighted_precision;
    if (!f.metrics.precision_degenerate) a.precision += f.metrics.precision, ++np;
    if (!f.metrics.recall_degenerate) a.recall += f.metrics.recall, ++nr;
    if (!f.metrics.f1_degenerate) a.f1 += f.metrics.f1, ++a.f1_folds;
    a.pooled += f.counts;
  }
  if (a.n_folds) {
    const double n = static_cast<double>(a.n_folds);
    a.accuracy /= n;
    a.macro_precision /= n;
    a.weighted_precision /= n;
  }
  if (np) a.precision /= static_cast<double>(np);
  if (nr) a.recall /= static_cast<double>(nr);
  if (a.f1_folds) a.f1 /= static_cast<double>(a.f1_folds);
  if (a.pooled.total()) a.pooled_metrics = stats::classification_metrics(a.pooled);
  return a;
}

inline std::vector<Sample> gather(std::span<const Sample> rows, std::span<const std::size_t> which) {
  std::vector<Sample> out;
  out.reserve(which.size());
  for (std::size_t i : which) out.push_back(rows[i]);
  return out;
}

inline CvReport lopo_cv(std::span<const Sample> rows, const Params& params, bool keep_models = false) {
  validate(params);
  CvReport rep;
  for (const auto& fold : lopo_folds(rows)) {
    const auto train = gather(rows, fold.train);
    Model m = train_forest(train, params);
    rep.folds.push_back(fold_report(fold.held_out, count_predictions(m, rows, fold.test), fold.train.size()));
    if (keep_models) rep.fold_models.push_back(std::move(m));
  }
  rep.aggregate = aggregate(rep.folds);
  return rep;
}

// ============================================================================
// Grid search
// ============================================================================

/// Candidate values per parameter; an empty list keeps the base value.
struct Grid {
  std::vector<int> n_trees;
  std::vector<int> max_depth;
  std::vector<int> min_samples_split;
  std::vector<int> min_samples_leaf;
  std::vector<int> features_per_split;
};

struct GridRow {
  Params params;
  CvAggregate result;
};

struct GridResult {
  Params best;
  std::vector<GridRow> table;
};

/// True when `a` ranks above `b`: higher F1, then accuracy, then shallower.
inline bool better(const GridRow& a, const GridRow& b) {
  if (a.result.f1 != b.result.f1) return a.result.f1 > b.result.f1;
  if (a.result.accuracy != b.result.accuracy) return a.result.accuracy > b.result.accuracy;
  return a.params.max_depth < b.params.max_depth;
}

inline GridResult grid_search(std::span<const Sample> rows, const Grid& grid, const Params& base = {}) {
  auto or_base = [](const std::vector<int>& v, int b) { return v.empty() ? std::vector<int>{b} : v; };
  std::vector<int> fps = grid.features_per_split;
  const bool base_fps = fps.empty();
  if (base_fps) fps.push_back(0);

  GridResult out;
  std::size_t best = 0;
  for (int nt : or_base(grid.n_trees, base.n_trees))
    for (int md : or_base(grid.max_depth, base.max_depth))
      for (int ms : or_base(grid.min_samples_split, base.min_samples_split))
        for (int ml : or_base(grid.min_samples_leaf, base.min_samples_leaf))
          for (int f : fps) {
            Params p = base;
            p.n_trees = nt;
            p.max_depth = md;
            p.min_samples_split = ms;
            p.min_samples_leaf = ml;
            if (!base_fps) p.features_per_split = f;
            out.table.push_back({p, lopo_cv(rows, p).aggregate});
            if (out.table.size() > 1 && better(out.table.back(), out.table[best])) best = out.table.size() - 1;
          }
  out.best = out.table[best].params;
  return out;
}

}  // namespace confadapt::forest
