#pragma once

// End-to-end scoring of a checkpoint on annotated pairs.

#include <string>
#include <vector>

#include "l2p/dataset_io.hpp"
#include "l2p/eval_metric.hpp"
#include "l2p/train.hpp"

namespace l2p {

struct EvalSample {
  std::string id;
  RasterImage input;
  RasterImage target;
  SceneMeta meta;
};

inline std::vector<EvalSample> load_split(const DatasetManifest& m, std::string_view which) {
  std::vector<EvalSample> out;
  for (const auto& e : m.split_entries(which)) {
    LoadedPair p = load_pair(m, e);
    out.push_back({e.id, std::move(p.input), std::move(p.target), std::move(p.meta)});
  }
  return out;
}

inline std::vector<TrainingPair> to_training_pairs(const std::vector<EvalSample>& samples) {
  std::vector<TrainingPair> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(make_training_pair(s.input, s.target));
  return out;
}

// Scores the ground-truth images themselves; an upper bound for any model.
inline EvalReport evaluate_ground_truth(const std::vector<EvalSample>& samples, const DetectorConfig& det = {}) {
  if (samples.empty()) throw InvalidArgument("evaluation set is empty");
  std::vector<PairScore> pairs;
  for (const auto& s : samples) pairs.push_back(count_pair(s.id, s.target, s.meta, det));
  return score(pairs);
}

inline EvalReport evaluate_run(const Checkpoint& ck, const std::vector<EvalSample>& samples, const DetectorConfig& det = {}) {
  if (samples.empty()) throw InvalidArgument("evaluation set is empty");
  Predictor predictor(ck);
  std::vector<PairScore> pairs;
  for (const auto& s : samples) pairs.push_back(count_pair(s.id, predictor.predict(s.input), s.meta, det));
  return score(pairs);
}

}  // namespace l2p
