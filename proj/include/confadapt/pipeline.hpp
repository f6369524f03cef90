#pragma once

#include <map>
#include <string>
#include <vector>

#include "confadapt/controller.hpp"
#include "confadapt/features.hpp"
#include "confadapt/forest.hpp"
#include "confadapt/labeler.hpp"
#include "confadapt/simulate.hpp"

namespace confadapt::pipeline {

struct Config {
  simulate::StudyConfig study;
  labeler::Thresholds thresholds;
  forest::Params forest;
  controller::LevelBounds bounds;
  controller::TableMode table_mode = controller::TableMode::VsRest;
};

struct Result {
  simulate::SimulatedStudy study;
  std::vector<labeler::KeyedLabel> labels;
  double labeler_agreement = 0.0;
  features::TrainingSet training;
  forest::CvReport cv;
  controller::ReplayResult replay;
  std::vector<controller::HypothesisResult> hypotheses;
};

inline double agreement(const std::vector<labeler::KeyedLabel>& a, const std::vector<labeler::KeyedLabel>& b) {
  if (a.size() != b.size()) throw InvalidArgument("label lists differ in length");
  if (a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].key != b[i].key) throw InvalidArgument("label lists are not aligned at " + to_string(a[i].key));
    same += a[i].label.state == b[i].label.state;
  }
  return static_cast<double>(same) / static_cast<double>(a.size());
}

/// Simulate, label, featurize, cross-validate and replay. Each episode is
/// replayed with the fold model that never saw its participant.
inline Result run(const Config& c) {
  Result r;
  r.study = simulate::simulate_study(c.study);
  r.labels = labeler::label_dataset(r.study.dataset, c.thresholds);
  r.labeler_agreement = agreement(r.labels, r.study.truth_labels());
  r.training = features::build_training_set(r.study.dataset, r.labels);

  const auto rows = forest::to_samples(r.training.rows);
  r.cv = forest::lopo_cv(rows, c.forest, true);

  std::map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < r.cv.folds.size(); ++i) fold_of[r.cv.folds[i].participant_id] = i;
  r.replay = controller::replay(
      r.study.dataset, r.labels,
      [&](const FailureEpisode& ep) {
        auto it = fold_of.find(ep.participant_id);
        if (it == fold_of.end()) throw InvalidArgument("no fold model for participant " + ep.participant_id);
        return controller::model_predictor(r.cv.fold_models[it->second]);
      },
      c.bounds);
  r.hypotheses = controller::evaluate_hypotheses(r.replay.totals, c.table_mode);
  return r;
}

}  // namespace confadapt::pipeline
